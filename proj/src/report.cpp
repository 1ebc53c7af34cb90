#include "rwre/report.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace rwre {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

// JSON has no infinities; they are spelled as strings.
json number(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

}  // namespace

json to_json(const TiltParams& tp) {
  json u = json::object();
  for (auto e : all_directions(tp.dimension)) u[to_string(e)] = tp.step(e);
  return {{"z", tp.z}, {"C", tp.C}, {"u", u}, {"theta", tp.theta}, {"D", tp.D}, {"c_z", tp.c_z}, {"residual", tp.residual}};
}

json to_json(const GapReport& r) {
  json trace = json::array();
  for (const auto& g : r.trace) {
    trace.push_back({{"on_ray_blocks", g.on_ray_blocks}, {"annealed_log", g.annealed}, {"quenched_log", g.quenched}});
  }
  return {{"ell", to_string(r.ell)},
          {"L", r.L},
          {"kbar", r.kbar},
          {"horizon", r.horizon},
          {"expected_tau", r.expected_tau},
          {"W", r.W},
          {"quenched_side", r.quenched_side},
          {"quenched_std_error", r.quenched_std_error},
          {"annealed_side", r.annealed_side},
          {"annealed_std_error", r.annealed_std_error},
          {"gap", r.gap},
          {"std_error", r.std_error},
          {"bias_bound", r.bias_bound},
          {"significance", number(r.significance)},
          {"bound_Ia", r.bound_Ia},
          {"bound_Iq", r.bound_Iq},
          {"ratio", r.ratio},
          {"disorder", r.disorder},
          {"groups", r.groups},
          {"blocks_per_group", r.blocks_per_group},
          {"envs_per_group", r.envs_per_group},
          {"verdict", to_string(r.verdict)},
          {"groups_trace", trace}};
}

json to_json(const RatePointEstimate& e) {
  return {{"x", e.x},
          {"I_a", e.I_a},
          {"I_q", e.I_q},
          {"std_error_a", e.std_error_a},
          {"std_error_q", e.std_error_q},
          {"method", to_string(e.method)},
          {"horizon", e.horizon}};
}

json to_json(const FreeEnergyEstimate& e) {
  return {{"theta", e.theta},
          {"value", e.value},
          {"std_error", number(e.std_error)},
          {"horizon", e.horizon},
          {"mode", e.mode == Mode::Annealed ? "annealed" : "quenched"},
          {"replicas", e.replicas},
          {"ess", e.ess},
          {"degenerate", e.degenerate}};
}

json envelope(const ExperimentConfig& cfg, const std::string& key, json payload) {
  return {{"config_hash", config_hash(cfg)}, {"seed", cfg.seed}, {"config", to_json(cfg)}, {key, std::move(payload)}};
}

void write_gap_trace_csv(std::ostream& out, const GapReport& rep, const std::string& hash, std::uint64_t seed) {
  out << "# config_hash=" << hash << " seed=" << seed << "\n";
  out << "group,on_ray_blocks,annealed_log,quenched_log,gap\n";
  for (std::size_t g = 0; g < rep.trace.size(); ++g) {
    const auto& t = rep.trace[g];
    out << g << ',' << t.on_ray_blocks << ',' << format_double(t.annealed) << ',' << format_double(t.quenched) << ','
        << format_double((t.annealed - t.quenched) / rep.expected_tau) << '\n';
  }
}

void write_rate_csv(std::ostream& out, const std::vector<RatePointEstimate>& rows, const std::string& hash,
                    std::uint64_t seed) {
  out << "# config_hash=" << hash << " seed=" << seed << "\n";
  const std::size_t d = rows.empty() ? 0 : rows.front().x.size();
  for (std::size_t k = 0; k < d; ++k) out << 'x' << k + 1 << ',';
  out << "I_a,I_q,stderr_a,stderr_q,method,horizon\n";
  for (const auto& r : rows) {
    for (double v : r.x) out << format_double(v) << ',';
    out << format_double(r.I_a) << ',' << format_double(r.I_q) << ',' << format_double(r.std_error_a) << ','
        << format_double(r.std_error_q) << ',' << to_string(r.method) << ',' << r.horizon << '\n';
  }
}

void write_block_csv(std::ostream& out, const std::vector<BlockSample>& blocks) {
  out << "tau1,on_ray,log_psi_product\n";
  for (const auto& b : blocks) {
    out << b.tau1 << ',' << (b.on_ray ? 1 : 0) << ','
        << format_double(b.psi_product > 0.0 ? std::log(b.psi_product) : -INFINITY) << '\n';
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace rwre
