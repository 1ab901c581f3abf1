// loopchan: command-line front end for the closed-loop channel library.
//
// Exit codes: 0 success, 1 usage or parameter error, 2 fit did not
// converge, 3 unusable input data.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "loopchan/channel.hpp"
#include "loopchan/error.hpp"
#include "loopchan/estimation.hpp"
#include "loopchan/injection.hpp"
#include "loopchan/pbs.hpp"
#include "loopchan/response.hpp"
#include "loopchan/serialization.hpp"

namespace lc = loopchan;

namespace {

constexpr int kExitError = 1;
constexpr int kExitConvergence = 2;
constexpr int kExitData = 3;

// Writes to `path`, or stdout when path is empty or "-".
template <class Fn>
void with_output(const std::string& path, Fn&& fn) {
    if (path.empty() || path == "-") {
        fn(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw lc::DataError("cannot write " + path);
    fn(out);
}

struct PeaksArgs {
    std::string channel;
    int k_max = 3;
    std::string out;
};

struct WrappedArgs {
    std::string channel;
    double t_end = 60.0;
    double dt = 0.1;
    std::optional<double> x;
    bool open_tube = false;
    std::string out;
};

struct TaylorArisArgs {
    std::string physical;
};

struct SimulateArgs {
    std::string model;
    std::optional<double> t_start;
    std::optional<double> dt;
    std::optional<std::size_t> n;
    bool derivative = false;
    std::string out;
};

struct PbsArgs {
    std::string config;
    std::string channel;
    double release_x = 0.0;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string frames;
    std::optional<double> receiver;
    std::optional<double> window;
    std::string trace;
};

struct FitInjectionArgs {
    std::string trace;
    std::size_t window = lc::kDefaultSmoothWindow;
    std::string out;
};

struct FitChannelArgs {
    std::string trace;
    std::string injection;
    std::string mean_trace;
    std::string config;
    std::string out;
    std::string residuals;
};

int run_peaks(const PeaksArgs& a) {
    const auto ch = lc::channel_params_from_json(lc::read_json_file(a.channel));
    const auto peaks = lc::peak_times(ch, a.k_max);
    with_output(a.out, [&](std::ostream& os) { lc::write_peaks_csv(os, peaks); });
    return 0;
}

int run_wrapped(const WrappedArgs& a) {
    const auto ch = lc::channel_params_from_json(lc::read_json_file(a.channel));
    const double x = a.x.value_or(ch.d_rx);
    const auto n = static_cast<std::size_t>(std::floor(a.t_end / a.dt + 1e-9));
    const lc::TimeGrid grid{a.dt, a.dt, n};
    grid.validate();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = a.open_tube ? lc::gaussian_response(ch, x, grid.at(i)) : lc::wrapped_response(ch, x, grid.at(i));
    }
    const auto trace = lc::Trace::on_grid(grid, std::move(y), "1/m");
    with_output(a.out, [&](std::ostream& os) { lc::write_trace_csv(os, trace); });
    return 0;
}

int run_taylor_aris(const TaylorArisArgs& a) {
    const auto pc = lc::physical_channel_from_json(lc::read_json_file(a.physical));
    std::cout << lc::format_double(lc::taylor_aris(pc)) << '\n';
    return 0;
}

int run_simulate(const SimulateArgs& a) {
    const lc::Json j = lc::read_json_file(a.model);
    const auto model = lc::forward_model_from_json(j);
    lc::TimeGrid grid;
    if (j.contains("grid")) grid = lc::time_grid_from_json(j.at("grid"));
    if (a.t_start) grid.t_start = *a.t_start;
    if (a.dt) grid.dt = *a.dt;
    if (a.n) grid.n = *a.n;
    grid.validate();
    const auto trace = a.derivative ? lc::predict_derivative(model, grid) : lc::predict(model, grid);
    with_output(a.out, [&](std::ostream& os) { lc::write_trace_csv(os, trace); });
    return 0;
}

int run_pbs(const PbsArgs& a) {
    auto cfg = lc::sim_config_from_json(lc::read_json_file(a.config));
    if (a.seed) cfg.seed = *a.seed;
    if (a.threads) cfg.threads = *a.threads;
    const auto ch = lc::channel_params_from_json(lc::read_json_file(a.channel));
    const auto sim = lc::simulate(cfg, ch, a.release_x);
    if (!a.frames.empty()) {
        with_output(a.frames, [&](std::ostream& os) { lc::write_frames_csv(os, sim); });
    }
    if (a.receiver) {
        const double window = a.window.value_or(sim.bin_width());
        const auto trace = lc::receiver_trace(sim, *a.receiver, window);
        with_output(a.trace, [&](std::ostream& os) { lc::write_trace_csv(os, trace); });
    }
    return 0;
}

int run_fit_injection(const FitInjectionArgs& a) {
    const auto meas = lc::read_trace_csv(std::filesystem::path(a.trace));
    const auto inj = lc::extract_injection(meas, a.window);
    with_output(a.out, [&](std::ostream& os) { os << lc::to_json(inj).dump(2) << '\n'; });
    return 0;
}

int run_fit_channel(const FitChannelArgs& a) {
    lc::FitProblem prob;
    prob.measured = lc::read_trace_csv(std::filesystem::path(a.trace));
    if (!a.config.empty()) lc::apply_fit_config(lc::read_json_file(a.config), prob);
    if (!a.injection.empty()) {
        prob.injection = lc::injection_from_json(lc::read_json_file(a.injection));
    } else if (!a.mean_trace.empty()) {
        prob.injection = lc::extract_injection(lc::read_trace_csv(std::filesystem::path(a.mean_trace)),
                                               prob.smooth_window);
    } else {
        throw lc::ParameterError("fit-channel needs --injection or --mean-trace");
    }

    const auto result = lc::fit_channel(prob);
    with_output(a.out, [&](std::ostream& os) { os << lc::to_json(result).dump(2) << '\n'; });
    if (!a.residuals.empty()) {
        const auto rep = lc::residual_report(result, prob);
        with_output(a.residuals, [&](std::ostream& os) {
            os << "t_s,intensity_residual,derivative_residual\n";
            for (std::size_t i = 0; i < rep.derivative.size(); ++i) {
                os << lc::format_double(rep.derivative.t[i]) << ',' << lc::format_double(rep.intensity.y[i + 1])
                   << ',' << lc::format_double(rep.derivative.y[i]) << '\n';
            }
        });
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-loop drift-diffusion channel: analytic model, particle simulation, fitting"};
    app.require_subcommand(1);

    PeaksArgs peaks;
    auto* peaks_cmd = app.add_subcommand("peaks", "Peak arrival times per loop cycle as CSV (k,t_max_s)");
    peaks_cmd->add_option("--channel", peaks.channel, "ChannelParams JSON")->required()->check(CLI::ExistingFile);
    peaks_cmd->add_option("--k-max", peaks.k_max, "Highest cycle index")->check(CLI::NonNegativeNumber);
    peaks_cmd->add_option("-o,--out", peaks.out, "Output CSV (default stdout)");

    WrappedArgs wrapped;
    auto* wrapped_cmd = app.add_subcommand("wrapped", "Analytic impulse response at the receiver as a Trace CSV");
    wrapped_cmd->add_option("--channel", wrapped.channel, "ChannelParams JSON")->required()->check(CLI::ExistingFile);
    wrapped_cmd->add_option("--t-end", wrapped.t_end, "Last sample time [s]");
    wrapped_cmd->add_option("--dt", wrapped.dt, "Sample step [s]; samples start at dt");
    wrapped_cmd->add_option("--x", wrapped.x, "Observation position [m] (default d_rx)");
    wrapped_cmd->add_flag("--open-tube", wrapped.open_tube, "Use the infinite-tube Gaussian instead");
    wrapped_cmd->add_option("-o,--out", wrapped.out, "Output CSV (default stdout)");

    TaylorArisArgs ta;
    auto* ta_cmd = app.add_subcommand("taylor-aris", "Effective diffusion of laminar pipe flow");
    ta_cmd->add_option("--physical", ta.physical, "PhysicalChannel JSON")->required()->check(CLI::ExistingFile);

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Predicted received intensity from a ForwardModel JSON");
    sim_cmd->add_option("--model", sim.model, "ForwardModel JSON (optional 'grid' object)")
        ->required()
        ->check(CLI::ExistingFile);
    sim_cmd->add_option("--t-start", sim.t_start, "Grid start [s]");
    sim_cmd->add_option("--dt", sim.dt, "Grid step [s]");
    sim_cmd->add_option("--n", sim.n, "Number of samples");
    sim_cmd->add_flag("--derivative", sim.derivative, "Write the time derivative instead");
    sim_cmd->add_option("-o,--out", sim.out, "Output Trace CSV (default stdout)");

    PbsArgs pbs;
    auto* pbs_cmd = app.add_subcommand("pbs", "Particle-based simulation on the ring");
    pbs_cmd->add_option("--config", pbs.config, "SimConfig JSON")->required()->check(CLI::ExistingFile);
    pbs_cmd->add_option("--channel", pbs.channel, "ChannelParams JSON")->required()->check(CLI::ExistingFile);
    pbs_cmd->add_option("--release-x", pbs.release_x, "Release position [m]");
    pbs_cmd->add_option("--seed", pbs.seed, "Override the config seed");
    pbs_cmd->add_option("--threads", pbs.threads, "Worker threads (results do not depend on it)");
    pbs_cmd->add_option("--frames", pbs.frames, "Frames CSV (t_s,bin_center_m,density_per_m)");
    pbs_cmd->add_option("--receiver", pbs.receiver, "Receiver position [m]");
    pbs_cmd->add_option("--window", pbs.window, "Receiver window length [m] (default one bin)");
    pbs_cmd->add_option("--trace", pbs.trace, "Receiver Trace CSV (default stdout)");

    FitInjectionArgs fi;
    auto* fi_cmd = app.add_subcommand("fit-injection", "Injection delay/duration/amplitude from a mean-intensity trace");
    fi_cmd->add_option("--trace", fi.trace, "Mean-intensity Trace CSV")->required()->check(CLI::ExistingFile);
    fi_cmd->add_option("--window", fi.window, "Moving-average window [samples]")->check(CLI::PositiveNumber);
    fi_cmd->add_option("-o,--out", fi.out, "Output InjectionProfile JSON (default stdout)");

    FitChannelArgs fc;
    auto* fc_cmd = app.add_subcommand("fit-channel", "Estimate d_eff, v_eff, l_eff, d_rx and scale from an ROI trace");
    fc_cmd->add_option("--trace", fc.trace, "ROI intensity Trace CSV")->required()->check(CLI::ExistingFile);
    auto* inj_opt = fc_cmd->add_option("--injection", fc.injection, "InjectionProfile JSON")->check(CLI::ExistingFile);
    fc_cmd->add_option("--mean-trace", fc.mean_trace, "Mean-intensity Trace CSV to extract the injection from")
        ->check(CLI::ExistingFile)
        ->excludes(inj_opt);
    fc_cmd->add_option("--config", fc.config, "Fit config JSON")->check(CLI::ExistingFile);
    fc_cmd->add_option("-o,--out", fc.out, "Output FitResult JSON (default stdout)");
    fc_cmd->add_option("--residuals", fc.residuals, "Residual CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*peaks_cmd) return run_peaks(peaks);
        if (*wrapped_cmd) return run_wrapped(wrapped);
        if (*ta_cmd) return run_taylor_aris(ta);
        if (*sim_cmd) return run_simulate(sim);
        if (*pbs_cmd) return run_pbs(pbs);
        if (*fi_cmd) return run_fit_injection(fi);
        if (*fc_cmd) return run_fit_channel(fc);
    } catch (const lc::ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n' << e.diagnostics();
        return kExitConvergence;
    } catch (const lc::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const lc::FitQualityError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
