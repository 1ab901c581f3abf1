#pragma once

// JSON objects use flat snake_case keys in SI base units. Readers throw
// ParameterError for missing or mistyped keys.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "json.hpp"
#include "loopchan/channel.hpp"
#include "loopchan/estimation.hpp"
#include "loopchan/injection.hpp"
#include "loopchan/pbs.hpp"
#include "loopchan/response.hpp"

namespace loopchan {

using Json = nlohmann::json;

Json to_json(const ChannelParams& p);
Json to_json(const PhysicalChannel& p);
Json to_json(const InjectionProfile& p);
Json to_json(const ForwardModel& m);
Json to_json(const TimeGrid& g);
Json to_json(const SimConfig& c);
Json to_json(const FitResult& r);

ChannelParams channel_params_from_json(const Json& j);
PhysicalChannel physical_channel_from_json(const Json& j);
InjectionProfile injection_from_json(const Json& j);
ForwardModel forward_model_from_json(const Json& j);
TimeGrid time_grid_from_json(const Json& j);
SimConfig sim_config_from_json(const Json& j);

/// Applies the optional keys bounds, init, n_starts, seed, smooth_window, max_iter to a problem.
void apply_fit_config(const Json& j, FitProblem& prob);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

/// `t_s,bin_center_m,density_per_m`, one row per frame and bin.
void write_frames_csv(std::ostream& out, const SimulationResult& sim);

/// `k,t_max_s`.
void write_peaks_csv(std::ostream& out, const std::vector<PeakTime>& peaks);

}  // namespace loopchan
