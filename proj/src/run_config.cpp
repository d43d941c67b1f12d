#include "dke/run_config.hpp"

#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <type_traits>

namespace dke {

using nlohmann::json;

json to_json(const RunConfig& c) {
  json j = json::object();
  for_each_field(c, [&](const char* key, const char*, const auto& v) { j[key] = v; });
  return j;
}

void apply_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::set<std::string> known;
  for_each_field(c, [&](const char* key, const char*, auto&) { known.insert(key); });
  for (const auto& item : j.items()) {
    if (known.count(item.key()) == 0) throw ConfigError("unknown config key: " + item.key());
  }
  for_each_field(c, [&](const char* key, const char*, auto& v) {
    using T = std::decay_t<decltype(v)>;
    if (!j.contains(key)) return;
    const json& x = j.at(key);
    bool ok = false;
    if constexpr (std::is_same_v<T, std::string>) ok = x.is_string();
    else if constexpr (std::is_same_v<T, std::uint64_t>) ok = x.is_number_unsigned() || (x.is_number_integer() && x.get<std::int64_t>() >= 0);
    else if constexpr (std::is_integral_v<T>) ok = x.is_number_integer();
    else ok = x.is_number();
    if (!ok) throw ConfigError(std::string("wrong type for config key: ") + key);
    v = x.get<T>();
  });
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  apply_json(c, j);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void echo_config(const RunConfig& c) {
  std::filesystem::create_directories(c.out_dir);
  std::ofstream out(std::filesystem::path(c.out_dir) / "config.json");
  if (!out) throw ConfigError("cannot write to " + c.out_dir);
  out << to_json(c).dump(2) << '\n';
}

void write_meta(const RunConfig& c, const std::string& command, std::chrono::system_clock::time_point start) {
  const auto end = std::chrono::system_clock::now();
  auto stamp = [](std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
  };
  const json meta{{"command", command},
                  {"started", stamp(start)},
                  {"finished", stamp(end)},
                  {"wall_seconds", std::chrono::duration<double>(end - start).count()}};
  std::filesystem::create_directories(c.out_dir);
  std::ofstream out(std::filesystem::path(c.out_dir) / "meta.json");
  out << meta.dump(2) << '\n';
}

}  // namespace dke
