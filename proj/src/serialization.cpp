#include "loopchan/serialization.hpp"

#include <fstream>
#include <ostream>
#include <string>

#include "loopchan/error.hpp"

namespace loopchan {

namespace {

double number(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ParameterError(std::string("missing key '") + key + "'");
    const Json& v = j.at(key);
    if (!v.is_number()) throw ParameterError(std::string("key '") + key + "' must be a number");
    return v.get<double>();
}

template <class T>
T integer(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    const Json& v = j.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0)) {
        throw ParameterError(std::string("key '") + key + "' must be a non-negative integer");
    }
    return static_cast<T>(v.get<unsigned long long>());
}

Interval interval(const Json& j, const char* key) {
    const Json& v = j.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw ParameterError(std::string("bounds '") + key + "' must be [lo, hi]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

Json to_json(const ChannelParams& p) {
    return {{"d_eff", p.d_eff}, {"v_eff", p.v_eff}, {"l_eff", p.l_eff}, {"d_rx", p.d_rx}};
}

Json to_json(const PhysicalChannel& p) {
    return {{"d_molecular", p.d_molecular}, {"r0", p.r0}, {"v_mean", p.v_mean}};
}

Json to_json(const InjectionProfile& p) {
    return {{"t0", p.t0}, {"tw", p.tw}, {"amplitude", p.amplitude}};
}

Json to_json(const ForwardModel& m) {
    return {{"channel", to_json(m.channel)}, {"injection", to_json(m.injection)}, {"scale", m.scale}};
}

Json to_json(const TimeGrid& g) {
    return {{"t_start", g.t_start}, {"dt", g.dt}, {"n", g.n}};
}

Json to_json(const SimConfig& c) {
    return {{"n_particles", c.n_particles}, {"dt", c.dt},           {"t_end", c.t_end}, {"n_bins", c.n_bins},
            {"record_every", c.record_every}, {"seed", c.seed}, {"threads", c.threads}};
}

Json to_json(const FitResult& r) {
    Json status = Json::object();
    for (std::size_t i = 0; i < kFitParameterNames.size(); ++i) {
        status[kFitParameterNames[i]] = to_string(r.bounds_status[i]);
    }
    Json starts = Json::array();
    for (const auto& s : r.starts) {
        starts.push_back({{"index", s.index},
                          {"converged", s.converged},
                          {"n_iter", s.n_iter},
                          {"residual_rms", s.residual_rms},
                          {"message", s.message}});
    }
    Json params = to_json(r.channel);
    params["scale"] = r.scale;
    return {{"params", params},
            {"residual_rms", r.residual_rms},
            {"n_iter", r.n_iter},
            {"converged", r.converged},
            {"start_index", r.start_index},
            {"bounds_status", status},
            {"starts", starts}};
}

ChannelParams channel_params_from_json(const Json& j) {
    ChannelParams p{number(j, "d_eff"), number(j, "v_eff"), number(j, "l_eff"), number(j, "d_rx")};
    p.validate();
    return p;
}

PhysicalChannel physical_channel_from_json(const Json& j) {
    PhysicalChannel p{number(j, "d_molecular"), number(j, "r0"), number(j, "v_mean")};
    p.validate();
    return p;
}

InjectionProfile injection_from_json(const Json& j) {
    InjectionProfile p{number(j, "t0"), number(j, "tw"), number(j, "amplitude")};
    p.validate();
    return p;
}

ForwardModel forward_model_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("channel") || !j.contains("injection")) {
        throw ParameterError("forward model needs 'channel' and 'injection'");
    }
    ForwardModel m{channel_params_from_json(j.at("channel")), injection_from_json(j.at("injection")),
                   number(j, "scale")};
    m.validate();
    return m;
}

TimeGrid time_grid_from_json(const Json& j) {
    TimeGrid g{number(j, "t_start"), number(j, "dt"), integer<std::size_t>(j, "n", 0)};
    g.validate();
    return g;
}

SimConfig sim_config_from_json(const Json& j) {
    SimConfig c;
    c.n_particles = integer<std::size_t>(j, "n_particles", c.n_particles);
    c.dt = number(j, "dt");
    c.t_end = number(j, "t_end");
    c.n_bins = integer<std::size_t>(j, "n_bins", c.n_bins);
    c.record_every = integer<std::size_t>(j, "record_every", c.record_every);
    c.seed = integer<std::uint64_t>(j, "seed", c.seed);
    c.threads = integer<unsigned>(j, "threads", c.threads);
    c.validate();
    return c;
}

void apply_fit_config(const Json& j, FitProblem& prob) {
    if (!j.is_object()) throw ParameterError("fit config must be a JSON object");
    if (j.contains("bounds")) {
        const Json& b = j.at("bounds");
        if (b.contains("d_eff")) prob.bounds.d_eff = interval(b, "d_eff");
        if (b.contains("v_eff")) prob.bounds.v_eff = interval(b, "v_eff");
        if (b.contains("l_eff")) prob.bounds.l_eff = interval(b, "l_eff");
        if (b.contains("fraction")) prob.bounds.fraction = interval(b, "fraction");
        if (b.contains("scale")) prob.bounds.scale = interval(b, "scale");
    }
    if (j.contains("init")) {
        const Json& i = j.at("init");
        prob.init = FitParams{channel_params_from_json(i), number(i, "scale")};
    }
    prob.n_starts = integer<std::size_t>(j, "n_starts", prob.n_starts);
    prob.seed = integer<std::uint64_t>(j, "seed", prob.seed);
    prob.smooth_window = integer<std::size_t>(j, "smooth_window", prob.smooth_window);
    prob.max_iter = integer<std::size_t>(j, "max_iter", prob.max_iter);
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open JSON file " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write JSON file " + path.string());
    out << j.dump(2) << '\n';
}

void write_frames_csv(std::ostream& out, const SimulationResult& sim) {
    out << "t_s,bin_center_m,density_per_m\n";
    for (const Frame& f : sim.frames) {
        const std::string t = format_double(f.t);
        for (std::size_t b = 0; b < f.density.size(); ++b) {
            out << t << ',' << format_double(sim.bin_center(b)) << ',' << format_double(f.density[b]) << '\n';
        }
    }
}

void write_peaks_csv(std::ostream& out, const std::vector<PeakTime>& peaks) {
    out << "k,t_max_s\n";
    for (const PeakTime& p : peaks) out << p.k << ',' << format_double(p.t_max) << '\n';
}

}  // namespace loopchan
