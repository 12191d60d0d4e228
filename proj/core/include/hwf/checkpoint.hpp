#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "hwf/model.hpp"
#include "hwf/training.hpp"

// Checkpoint file: magic "HWFK", format version u32, a length-prefixed
// canonical key=value config block, then per-parameter records of
// (name length u32, name bytes, dtype tag u8, rank u32, extents u64...,
// raw little-endian values). Optimizer state rides in the same record stream
// under reserved names: "optim.step", "optim.m.<param>", "optim.v.<param>".

namespace hwf {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

class CheckpointCorrupt : public DataError {
public:
    explicit CheckpointCorrupt(const std::string& m) : DataError("corrupt checkpoint: " + m) {}
};
class CheckpointVersionMismatch : public DataError {
public:
    explicit CheckpointVersionMismatch(const std::string& m)
        : DataError("checkpoint version mismatch: " + m) {}
};
class CheckpointArchMismatch : public DataError {
public:
    explicit CheckpointArchMismatch(const std::string& m)
        : DataError("checkpoint architecture mismatch: " + m) {}
};

namespace ckpt_detail {

constexpr char kMagic[4] = {'H', 'W', 'F', 'K'};
constexpr uint32_t kVersion = 1;

template <typename V>
void put(std::string& out, V v) {
    char buf[sizeof(V)];
    std::memcpy(buf, &v, sizeof(V));
    out.append(buf, sizeof(V));
}

struct Reader {
    const std::string& bytes;
    size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw CheckpointCorrupt(what + " at byte " + std::to_string(pos));
    }
    void need(size_t n) const {
        if (bytes.size() - pos < n) fail("unexpected end of file");
    }
    template <typename V>
    V get() {
        need(sizeof(V));
        V v;
        std::memcpy(&v, bytes.data() + pos, sizeof(V));
        pos += sizeof(V);
        return v;
    }
    std::string get_str(size_t n) {
        need(n);
        std::string s(bytes.data() + pos, n);
        pos += n;
        return s;
    }
};

template <typename T>
constexpr uint8_t dtype_tag() {
    return std::is_same_v<T, float> ? 1 : 2;
}

template <typename T>
void put_record(std::string& out, const std::string& name, const Shape& shape,
                const std::vector<T>& values) {
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.append(name);
    put<uint8_t>(out, dtype_tag<T>());
    put<uint32_t>(out, static_cast<uint32_t>(shape.size()));
    for (int64_t e : shape) put<uint64_t>(out, static_cast<uint64_t>(e));
    out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(T));
}

struct RawRecord {
    std::string name;
    uint8_t dtype = 0;
    Shape shape;
    size_t payload_pos = 0;  // offset of the raw values in the file
    int64_t count = 0;
};

inline RawRecord read_record_header(Reader& r) {
    RawRecord rec;
    const uint32_t name_len = r.get<uint32_t>();
    if (name_len > 4096) r.fail("implausible name length");
    rec.name = r.get_str(name_len);
    rec.dtype = r.get<uint8_t>();
    if (rec.dtype != 1 && rec.dtype != 2) r.fail("unknown dtype tag in record " + rec.name);
    const uint32_t rank = r.get<uint32_t>();
    if (rank > 8) r.fail("implausible rank in record " + rec.name);
    rec.count = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        const auto e = static_cast<int64_t>(r.get<uint64_t>());
        if (e <= 0 || e > (int64_t(1) << 40)) r.fail("bad extent in record " + rec.name);
        rec.shape.push_back(e);
        rec.count *= e;
    }
    rec.payload_pos = r.pos;
    const size_t elem = rec.dtype == 1 ? 4 : 8;
    r.need(static_cast<size_t>(rec.count) * elem);
    r.pos += static_cast<size_t>(rec.count) * elem;
    return rec;
}

template <typename T>
void copy_payload(const std::string& bytes, const RawRecord& rec, std::vector<T>& dst) {
    if (rec.dtype != dtype_tag<T>())
        throw CheckpointArchMismatch("record " + rec.name + " has a different precision");
    if (static_cast<int64_t>(dst.size()) != rec.count)
        throw CheckpointCorrupt("record " + rec.name + " size mismatch");
    std::memcpy(dst.data(), bytes.data() + rec.payload_pos, dst.size() * sizeof(T));
}

}  // namespace ckpt_detail

template <typename T>
struct Checkpoint {
    ModelConfig model;
    KvMap kv;  // full embedded config block
    ModelWeights<T> weights;
    OptimState<T> optim;
    bool has_optim = false;
};

template <typename T>
void save_checkpoint(const ModelWeights<T>& weights, const OptimState<T>* optim,
                     const ModelConfig& mcfg, const KvMap& extra, const std::string& path) {
    using namespace ckpt_detail;
    KvMap kv = extra;
    for (const auto& [k, v] : mcfg.to_kv()) kv[k] = v;
    const std::string config_text = serialize_kv(kv);

    std::string out;
    out.append(kMagic, 4);
    put<uint32_t>(out, kVersion);
    put<uint64_t>(out, config_text.size());
    out.append(config_text);

    auto reg = weights.registry();
    uint64_t records = reg.size();
    if (optim) records += 1 + 2 * reg.size();
    put<uint64_t>(out, records);

    for (const auto& [name, t] : reg) put_record<T>(out, name, t->shape(), t->data());
    if (optim) {
        if (optim->m.size() != reg.size() || optim->v.size() != reg.size())
            throw UsageError("save_checkpoint: optimizer state does not match the registry");
        put_record<double>(out, "optim.step", Shape{},
                           {static_cast<double>(optim->step)});
        for (size_t i = 0; i < reg.size(); ++i)
            put_record<T>(out, "optim.m." + reg[i].first, reg[i].second->shape(), optim->m[i]);
        for (size_t i = 0; i < reg.size(); ++i)
            put_record<T>(out, "optim.v." + reg[i].first, reg[i].second->shape(), optim->v[i]);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("short write: " + path);
}

// Header-only read; used to pick the precision before the templated load.
inline KvMap read_checkpoint_config(const std::string& path) {
    using namespace ckpt_detail;
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{bytes};
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw CheckpointCorrupt("bad magic in " + path);
    r.pos = 4;
    const uint32_t version = r.get<uint32_t>();
    if (version != kVersion)
        throw CheckpointVersionMismatch("file has version " + std::to_string(version) +
                                        ", expected " + std::to_string(kVersion));
    const uint64_t len = r.get<uint64_t>();
    return parse_kv_text(r.get_str(len));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path, const ModelConfig* expected = nullptr) {
    using namespace ckpt_detail;
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r{bytes};
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw CheckpointCorrupt("bad magic in " + path);
    r.pos = 4;
    const uint32_t version = r.get<uint32_t>();
    if (version != kVersion)
        throw CheckpointVersionMismatch("file has version " + std::to_string(version) +
                                        ", expected " + std::to_string(kVersion));
    const uint64_t config_len = r.get<uint64_t>();

    Checkpoint<T> ck;
    ck.kv = parse_kv_text(r.get_str(config_len));
    ck.model = ModelConfig::from_kv(ck.kv);
    if ((ck.model.precision == Precision::f32) != std::is_same_v<T, float>)
        throw CheckpointArchMismatch("checkpoint precision is " +
                                     std::string(ck.model.precision == Precision::f32 ? "f32" : "f64"));
    if (expected) {
        const KvMap want = expected->to_kv(), got = ck.model.to_kv();
        for (const auto& [k, v] : want)
            if (got.at(k) != v)
                throw CheckpointArchMismatch(k + " is " + got.at(k) + ", expected " + v);
    }

    ck.weights = make_zero_weights<T>(ck.model);
    auto reg = ck.weights.registry();
    std::unordered_map<std::string, size_t> index;
    for (size_t i = 0; i < reg.size(); ++i) index[reg[i].first] = i;
    std::vector<bool> filled(reg.size(), false);

    ck.optim = make_optim_state(ck.weights);
    std::vector<bool> filled_m(reg.size(), false), filled_v(reg.size(), false);

    const uint64_t records = r.get<uint64_t>();
    for (uint64_t i = 0; i < records; ++i) {
        const RawRecord rec = read_record_header(r);
        if (rec.name == "optim.step") {
            if (rec.dtype != 2 || rec.count != 1) throw CheckpointCorrupt("bad optim.step record");
            double step;
            std::memcpy(&step, bytes.data() + rec.payload_pos, sizeof(double));
            ck.optim.step = static_cast<int64_t>(step);
            ck.has_optim = true;
        } else if (rec.name.rfind("optim.m.", 0) == 0 || rec.name.rfind("optim.v.", 0) == 0) {
            const bool is_m = rec.name[6] == 'm';
            const std::string pname = rec.name.substr(8);
            const auto it = index.find(pname);
            if (it == index.end()) throw CheckpointCorrupt("optimizer record for unknown " + pname);
            copy_payload(bytes, rec, is_m ? ck.optim.m[it->second] : ck.optim.v[it->second]);
            (is_m ? filled_m : filled_v)[it->second] = true;
        } else {
            const auto it = index.find(rec.name);
            if (it == index.end())
                throw CheckpointArchMismatch("unknown parameter " + rec.name +
                                             " (architecture differs)");
            if (reg[it->second].second->shape() != rec.shape)
                throw CheckpointCorrupt("parameter " + rec.name + " has unexpected shape");
            copy_payload(bytes, rec, reg[it->second].second->mutable_data());
            filled[it->second] = true;
        }
    }
    for (size_t i = 0; i < reg.size(); ++i) {
        if (!filled[i]) throw CheckpointCorrupt("missing parameter " + reg[i].first);
        if (ck.has_optim && (!filled_m[i] || !filled_v[i]))
            throw CheckpointCorrupt("missing optimizer moments for " + reg[i].first);
    }
    return ck;
}

}  // namespace hwf
