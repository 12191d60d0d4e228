#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace hwf {

// Flat key=value configuration text with section-prefixed keys
// (model.*, train.*, eval.*). '#' starts a comment; blank lines are ignored.
// Serialization is canonical: keys sorted, one "key=value" per line.
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv_text(const std::string& text);
std::string serialize_kv(const KvMap& kv);
KvMap load_kv_file(const std::string& path);

// Typed lookups; throw ConfigError on malformed values. The *_or forms
// return the fallback when the key is absent.
int64_t kv_int(const KvMap& kv, const std::string& key);
int64_t kv_int_or(const KvMap& kv, const std::string& key, int64_t fallback);
double kv_double(const KvMap& kv, const std::string& key);
double kv_double_or(const KvMap& kv, const std::string& key, double fallback);
bool kv_bool_or(const KvMap& kv, const std::string& key, bool fallback);
std::string kv_str_or(const KvMap& kv, const std::string& key, const std::string& fallback);

std::string format_double(double v);  // round-trip-exact text form

}  // namespace hwf
