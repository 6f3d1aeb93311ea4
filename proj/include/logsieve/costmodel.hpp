#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace logsieve::costmodel {

/// Currency per 1,000 tokens.
struct PriceSheet {
  double p_in = 0.0;
  double p_out = 0.0;
};

struct TokenLedger {
  std::uint64_t t_in_full = 0;
  std::uint64_t t_in_reduced = 0;
  std::uint64_t t_removed = 0;
  std::uint64_t t_out = 0;

  /// Throws ValidationError when t_in_reduced > t_in_full.
  static TokenLedger from_counts(std::uint64_t t_in_full, std::uint64_t t_in_reduced,
                                 std::uint64_t t_out = 0);
};

struct CarbonParams {
  double energy_per_kilotoken = 0.0;
  double grid_intensity = 0.0;  // mass CO2 per energy unit
};

double inference_cost(std::uint64_t t_in, std::uint64_t t_out, const PriceSheet& prices);
double cost_delta(const TokenLedger& ledger, const PriceSheet& prices, std::int64_t delta_t_out = 0);
double carbon_delta(std::uint64_t t_removed, const CarbonParams& params);

/// Contents of a `key = value` parameter file.
struct CostParams {
  PriceSheet prices;
  CarbonParams carbon;
  std::string currency_label = "USD";
  std::string energy_label = "kWh";
};

/// Parses `key = value` lines (`#` comments, optional quotes on labels).
/// p_in, p_out, energy_per_kilotoken and grid_intensity are required.
CostParams parse_params(std::string_view text);
CostParams load_params(const std::filesystem::path& path);

}  // namespace logsieve::costmodel
