#include "logsieve/costmodel.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "logsieve/error.hpp"

namespace logsieve::costmodel {
namespace {

void check_non_negative(double v, std::string_view name) {
  if (!std::isfinite(v) || v < 0.0) {
    throw ValidationError(std::string(name) + " must be a finite non-negative number");
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

TokenLedger TokenLedger::from_counts(std::uint64_t t_in_full, std::uint64_t t_in_reduced,
                                     std::uint64_t t_out) {
  if (t_in_reduced > t_in_full) {
    throw ValidationError("reduced input tokens exceed the full count");
  }
  return {t_in_full, t_in_reduced, t_in_full - t_in_reduced, t_out};
}

double inference_cost(std::uint64_t t_in, std::uint64_t t_out, const PriceSheet& prices) {
  return static_cast<double>(t_in) / 1000.0 * prices.p_in +
         static_cast<double>(t_out) / 1000.0 * prices.p_out;
}

double cost_delta(const TokenLedger& ledger, const PriceSheet& prices, std::int64_t delta_t_out) {
  if (ledger.t_in_reduced > ledger.t_in_full ||
      ledger.t_removed != ledger.t_in_full - ledger.t_in_reduced) {
    throw ValidationError("token ledger is inconsistent: t_removed != t_in_full - t_in_reduced");
  }
  return static_cast<double>(ledger.t_removed) / 1000.0 * prices.p_in +
         static_cast<double>(delta_t_out) / 1000.0 * prices.p_out;
}

double carbon_delta(std::uint64_t t_removed, const CarbonParams& params) {
  return static_cast<double>(t_removed) / 1000.0 * params.energy_per_kilotoken *
         params.grid_intensity;
}

CostParams parse_params(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      // Keep '#' inside quoted labels.
      const auto quote = line.find('"');
      if (quote == std::string_view::npos || hash < quote) line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InputError("cost params line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (!kv.emplace(key, std::string(value)).second) {
      throw InputError("cost params: duplicate key '" + key + "'");
    }
  }

  auto number = [&](std::string_view key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw InputError("cost params: missing required key '" + std::string(key) + "'");
    double v = 0.0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw InputError("cost params: '" + std::string(key) + "' is not a number: " + s);
    }
    check_non_negative(v, key);
    return v;
  };

  CostParams p;
  p.prices.p_in = number("p_in");
  p.prices.p_out = number("p_out");
  p.carbon.energy_per_kilotoken = number("energy_per_kilotoken");
  p.carbon.grid_intensity = number("grid_intensity");
  if (const auto it = kv.find("currency_label"); it != kv.end()) p.currency_label = it->second;
  if (const auto it = kv.find("energy_label"); it != kv.end()) p.energy_label = it->second;
  for (const auto& [k, v] : kv) {
    static constexpr std::string_view known[] = {"p_in", "p_out", "energy_per_kilotoken",
                                                 "grid_intensity", "currency_label", "energy_label"};
    bool ok = false;
    for (const auto name : known) ok = ok || k == name;
    if (!ok) throw InputError("cost params: unknown key '" + k + "'");
  }
  return p;
}

CostParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read cost params: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_params(ss.str());
}

}  // namespace logsieve::costmodel
