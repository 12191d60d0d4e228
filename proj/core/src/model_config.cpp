#include "hwf/model_config.hpp"

namespace hwf {

void ModelConfig::validate() const {
    if (in_channels != 1 && in_channels != 3)
        throw ConfigError("model: in_channels must be 1 or 3");
    if (base_channels < 1) throw ConfigError("model: base_channels must be positive");
    if (heads < 1) throw ConfigError("model: heads must be positive");
    if (gte_window < 2 || tde_window < 2) throw ConfigError("model: windows must be >= 2");
    if (patch < 1 || gte_window % patch != 0)
        throw ConfigError("model: patch must divide gte_window");
    if (tde_patch < 1 || tde_window % tde_patch != 0)
        throw ConfigError("model: tde_patch must divide tde_window");
    if (shift < 0 || shift >= tde_window)
        throw ConfigError("model: shift must lie in [0, tde_window)");
    if (dilation_rate < 1) throw ConfigError("model: dilation_rate must be >= 1");
    if (gte_token_dim() % heads != 0)
        throw ConfigError("model: GTE token dim " + std::to_string(gte_token_dim()) +
                          " not divisible by heads");
    if (tde_token_dim() % heads != 0)
        throw ConfigError("model: TDE token dim " + std::to_string(tde_token_dim()) +
                          " not divisible by heads");
}

ModelConfig ModelConfig::preset(const std::string& name) {
    ModelConfig cfg;
    if (name == "paper") {
        // defaults above
    } else if (name == "toy") {
        cfg.base_channels = 8;
        cfg.heads = 2;
        cfg.gte_window = 16;
        cfg.tde_window = 8;
        cfg.patch = 2;
        cfg.tde_patch = 2;
        cfg.shift = 4;
    } else {
        throw ConfigError("unknown preset: " + name + " (expected 'paper' or 'toy')");
    }
    cfg.validate();
    return cfg;
}

ModelConfig ModelConfig::from_kv(const KvMap& kv) {
    ModelConfig def;
    ModelConfig cfg;
    cfg.in_channels = kv_int_or(kv, "model.in_channels", def.in_channels);
    cfg.base_channels = kv_int_or(kv, "model.base_channels", def.base_channels);
    cfg.heads = kv_int_or(kv, "model.heads", def.heads);
    cfg.gte_window = kv_int_or(kv, "model.gte_window", def.gte_window);
    cfg.tde_window = kv_int_or(kv, "model.tde_window", def.tde_window);
    cfg.patch = kv_int_or(kv, "model.patch", def.patch);
    cfg.tde_patch = kv_int_or(kv, "model.tde_patch", def.tde_patch);
    cfg.shift = kv_int_or(kv, "model.shift", cfg.tde_window / 2);
    cfg.dilation_rate = kv_int_or(kv, "model.dilation_rate", def.dilation_rate);
    cfg.rel_bias_gte = kv_bool_or(kv, "model.rel_bias_gte", def.rel_bias_gte);
    cfg.rel_bias_tde = kv_bool_or(kv, "model.rel_bias_tde", def.rel_bias_tde);
    const std::string order = kv_str_or(kv, "model.tde_order", "prose");
    if (order == "prose")
        cfg.tde_order = TdeOrder::prose;
    else if (order == "nested")
        cfg.tde_order = TdeOrder::nested;
    else
        throw ConfigError("model.tde_order must be 'prose' or 'nested'");
    const std::string prec = kv_str_or(kv, "model.precision", "f32");
    if (prec == "f32")
        cfg.precision = Precision::f32;
    else if (prec == "f64")
        cfg.precision = Precision::f64;
    else
        throw ConfigError("model.precision must be 'f32' or 'f64'");
    cfg.validate();
    return cfg;
}

KvMap ModelConfig::to_kv() const {
    KvMap kv;
    kv["model.in_channels"] = std::to_string(in_channels);
    kv["model.base_channels"] = std::to_string(base_channels);
    kv["model.heads"] = std::to_string(heads);
    kv["model.gte_window"] = std::to_string(gte_window);
    kv["model.tde_window"] = std::to_string(tde_window);
    kv["model.patch"] = std::to_string(patch);
    kv["model.tde_patch"] = std::to_string(tde_patch);
    kv["model.shift"] = std::to_string(shift);
    kv["model.dilation_rate"] = std::to_string(dilation_rate);
    kv["model.rel_bias_gte"] = rel_bias_gte ? "1" : "0";
    kv["model.rel_bias_tde"] = rel_bias_tde ? "1" : "0";
    kv["model.tde_order"] = tde_order == TdeOrder::prose ? "prose" : "nested";
    kv["model.precision"] = precision == Precision::f32 ? "f32" : "f64";
    return kv;
}

std::vector<Direction> tde_sequence(TdeOrder order) {
    using D = Direction;
    if (order == TdeOrder::prose)
        return {D::Ho, D::Ve, D::Co, D::Ho, D::Ve, D::Co, D::Ho, D::Ve};
    return {D::Ve, D::Ho, D::Co, D::Ve, D::Ho, D::Co, D::Ve, D::Ho};
}

const char* direction_name(Direction d) {
    switch (d) {
        case Direction::Ho: return "Ho";
        case Direction::Ve: return "Ve";
        case Direction::Co: return "Co";
    }
    return "?";
}

}  // namespace hwf
