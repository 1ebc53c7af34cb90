#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "rwre/config.hpp"
#include "rwre/decomp.hpp"
#include "rwre/ldp.hpp"
#include "rwre/tilt.hpp"

namespace rwre {

nlohmann::json to_json(const TiltParams& tp);
nlohmann::json to_json(const GapReport& rep);
nlohmann::json to_json(const RatePointEstimate& est);
nlohmann::json to_json(const FreeEnergyEstimate& est);

/// {"config_hash", "seed", "config", <key>: payload} for replay.
nlohmann::json envelope(const ExperimentConfig& cfg, const std::string& key, nlohmann::json payload);

/// Shortest round-trip decimal form of a double ("nan"/"inf" spelled out).
std::string format_double(double v);

/// group,on_ray_blocks,annealed_log,quenched_log,gap
void write_gap_trace_csv(std::ostream& out, const GapReport& rep, const std::string& hash, std::uint64_t seed);

/// x1..xd,I_a,I_q,stderr_a,stderr_q,method,horizon
void write_rate_csv(std::ostream& out, const std::vector<RatePointEstimate>& rows, const std::string& hash,
                    std::uint64_t seed);

/// tau1,on_ray,log_psi_product
void write_block_csv(std::ostream& out, const std::vector<BlockSample>& blocks);

/// Writes text to path, creating parent directories.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace rwre
