#pragma once

#include <string>
#include <vector>

#include "hwf/common.hpp"
#include "hwf/config_file.hpp"

namespace hwf {

enum class Precision { f32, f64 };
enum class Direction { Ho, Ve, Co };
enum class TdeOrder { prose, nested };

// Architectural hyperparameters of one HWformer instance.
struct ModelConfig {
    int64_t in_channels = 1;
    int64_t base_channels = 64;
    int64_t heads = 4;
    int64_t gte_window = 96;
    int64_t tde_window = 48;
    int64_t patch = 6;      // GTEBlock token patch
    int64_t tde_patch = 6;  // directional-transformer token patch
    int64_t shift = 24;     // Ho/Ve cyclic shift, default tde_window/2
    int64_t dilation_rate = 3;
    bool rel_bias_gte = false;
    bool rel_bias_tde = true;
    TdeOrder tde_order = TdeOrder::prose;
    Precision precision = Precision::f32;

    int64_t gte_token_dim() const { return base_channels * patch * patch; }
    int64_t tde_token_dim() const { return base_channels * tde_patch * tde_patch; }
    int64_t gte_grid() const { return gte_window / patch; }
    int64_t tde_grid() const { return tde_window / tde_patch; }

    void validate() const;

    static ModelConfig preset(const std::string& name);  // "paper" or "toy"
    static ModelConfig from_kv(const KvMap& kv);
    KvMap to_kv() const;
};

// The eight directional transformers in application order. The prose order
// places Ho at layers 1, 4 and 7; the nested order reads the composed form
// inside-out instead.
std::vector<Direction> tde_sequence(TdeOrder order);

const char* direction_name(Direction d);

}  // namespace hwf
