// dcmg: analysis and simulation front end for DC microgrid configs.

#include "dcmg/config.hpp"
#include "dcmg/error.hpp"
#include "dcmg/report.hpp"
#include "dcmg/simulate.hpp"

#include <CLI11.hpp>
#include <glob.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using namespace dcmg;

namespace {

enum Exit : int {
    kOk = 0,
    kConfigError = 1,
    kCertificateFailure = 2,
    kVoltageCollapse = 3,
    kNumericalFailure = 4,
};

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("dcmg");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("DCMG_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to "off"; only honour real ones.
        if (level != spdlog::level::off || std::string(env) == "off") {
            spdlog::set_level(level);
        } else {
            spdlog::warn("DCMG_LOG='{}' not recognised (use trace, debug, info, warn, error, off)", env);
        }
    }
}

int exit_for_equilibrium(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NoCertificate:
        case ErrorKind::RankDeficient:
        case ErrorKind::SingularNominal:
        case ErrorKind::SingularGamma:
            return kCertificateFailure;
        default:
            return kNumericalFailure;
    }
}

void warn_gains(const RunReport& report) {
    for (std::size_t i = 0; i < report.gains.size(); ++i) {
        const GainVerdict& g = report.gains[i];
        if (!g.guaranteed()) {
            std::string why;
            for (const auto& v : g.violations) why += (why.empty() ? "" : "; ") + v;
            spdlog::warn("DGU {}: gains outside the guaranteed set ({})", i + 1, why);
        }
    }
}

int cmd_check(const fs::path& cfg) {
    const MicrogridSpec spec = load_config(cfg);
    spdlog::info("loaded {} with {} buses and {} lines", cfg.string(), spec.bus_count(), spec.line_count());
    const RunReport report = analyse(spec);
    std::cout << format_report(report);

    const bool gains_ok = std::all_of(report.gains.begin(), report.gains.end(),
                                      [](const GainVerdict& g) { return g.guaranteed(); });
    if (!gains_ok) {
        return kCertificateFailure;
    }
    if (report.equilibrium_error) {
        return exit_for_equilibrium(*report.equilibrium_error);
    }
    if (!report.stability || !report.stability->stable) {
        return kCertificateFailure;
    }
    if (report.loads && !report.loads->all()) {
        spdlog::warn("P < Y V^2 fails at some bus; stability is not guaranteed there");
    }
    return kOk;
}

int cmd_solve(const fs::path& cfg, const fs::path& out_dir) {
    const MicrogridSpec spec = load_config(cfg);
    const RunReport report = analyse(spec);
    if (report.equilibrium_error) {
        std::cout << format_report(report);
        spdlog::error("{}", report.equilibrium_note);
        return exit_for_equilibrium(*report.equilibrium_error);
    }
    const EquilibriumPoint& eq = *report.equilibrium;
    const GlobalState& s = eq.state;
    std::cout << "V_bar      ";
    for (int i = 0; i < s.buses(); ++i) std::cout << ' ' << format_number(s.voltage()(i));
    std::cout << "\nIt_bar     ";
    for (int i = 0; i < s.buses(); ++i) std::cout << ' ' << format_number(s.filter_current()(i));
    std::cout << "\nepsilon     " << format_number(eq.sharing_level);
    std::cout << "\nI_bar      ";
    for (int l = 0; l < s.lines(); ++l) std::cout << ' ' << format_number(s.line_current()(l));
    std::cout << "\nv_bar      ";
    for (int i = 0; i < s.buses(); ++i) std::cout << ' ' << format_number(s.integrator()(i));
    std::cout << "\nOmega_bar  ";
    for (int i = 0; i < s.buses(); ++i) std::cout << ' ' << format_number(s.consensus()(i));
    std::cout << "\nvoltage residual " << format_number(report.solution->residual) << "\nstate residual   "
              << format_number(report.stability->equilibrium_residual) << "\niterations       "
              << report.solution->iterations << '\n';

    fs::create_directories(out_dir);
    const fs::path csv = out_dir / "equilibrium.csv";
    write_equilibrium_csv(csv, eq, *report.solution);
    spdlog::info("wrote {}", csv.string());
    return kOk;
}

struct RunOutcome {
    int code = kOk;
    RunReport report;
};

RunOutcome run_config(const fs::path& cfg, const fs::path& out_dir) {
    const MicrogridSpec spec = load_config(cfg);
    RunOutcome outcome;
    outcome.report = analyse(spec);
    warn_gains(outcome.report);
    if (outcome.report.equilibrium_error) {
        spdlog::warn("{}: {}", cfg.string(), outcome.report.equilibrium_note);
    }

    const auto start = std::chrono::steady_clock::now();
    const Trajectory traj = run_scenario(spec);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    spdlog::info("{}: {} steps in {:.2f} s wall clock", cfg.string(), traj.steps, wall);

    const ExistenceCertificate* cert = outcome.report.cert ? &*outcome.report.cert : nullptr;
    const Metrics metrics = compute_metrics(traj, spec, cert);

    fs::create_directories(out_dir);
    write_trajectory_csv(out_dir / "trajectory.csv", traj);
    write_metrics_csv(out_dir / "metrics.csv", metrics);
    {
        std::ofstream py(out_dir / "plot.py", std::ios::binary | std::ios::trunc);
        py << plot_script(spec, cert);
    }
    RunReport& report = outcome.report;
    report.files = {"trajectory.csv", "metrics.csv", "plot.py", "report.txt"};
    summarize_run(report, spec, traj, metrics);
    {
        std::ofstream txt(out_dir / "report.txt", std::ios::binary | std::ios::trunc);
        txt << format_report(report);
    }
    if (report.verdict == ReportVerdict::VoltageCollapse) {
        spdlog::warn("{}: voltage collapse at bus {} (t = {} s)", cfg.string(), report.collapse->bus + 1,
                     format_number(report.collapse->time));
        outcome.code = kVoltageCollapse;
    } else if (report.verdict == ReportVerdict::NotSettled) {
        spdlog::warn("{}: trajectory has not settled by t = {} s", cfg.string(), format_number(report.final_time));
    }
    return outcome;
}

int cmd_run(const fs::path& cfg, const fs::path& out_dir) {
    RunOutcome outcome = run_config(cfg, out_dir);
    std::cout << format_report(outcome.report);
    return outcome.code;
}

// Exceptions thrown by the library mapped onto the exit contract.
template <typename F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const Error& err) {
        spdlog::error("{}", err.what());
        switch (err.kind()) {
            case ErrorKind::ConfigError:
            case ErrorKind::InvalidGraph:
            case ErrorKind::InvalidParameter:
            case ErrorKind::DimensionMismatch:
            case ErrorKind::MissingGains:
                return kConfigError;
            case ErrorKind::NoCertificate:
            case ErrorKind::RankDeficient:
            case ErrorKind::SingularNominal:
                return kCertificateFailure;
            case ErrorKind::NonPositiveVoltage:
                return kVoltageCollapse;
            default:
                return kNumericalFailure;
        }
    } catch (const std::exception& err) {
        spdlog::error("{}", err.what());
        return kNumericalFailure;
    }
}

std::vector<fs::path> expand(const std::string& pattern) {
    glob_t g{};
    std::vector<fs::path> out;
    if (::glob(pattern.c_str(), 0, nullptr, &g) == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    ::globfree(&g);
    std::sort(out.begin(), out.end());
    return out;
}

int cmd_sweep(const std::string& pattern, const fs::path& out_root, unsigned jobs) {
    const std::vector<fs::path> configs = expand(pattern);
    if (configs.empty()) {
        spdlog::error("no config matches '{}'", pattern);
        return kConfigError;
    }
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(configs.size()));

    std::vector<int> codes(configs.size(), kOk);
    std::vector<std::string> verdicts(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < configs.size(); k = next++) {
            const fs::path dir = out_root / configs[k].stem();
            codes[k] = guarded([&] {
                RunOutcome outcome = run_config(configs[k], dir);
                verdicts[k] = to_string(outcome.report.verdict);
                return outcome.code;
            });
            if (verdicts[k].empty()) verdicts[k] = "error";
        }
    };
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    int worst = kOk;
    for (std::size_t k = 0; k < configs.size(); ++k) {
        std::cout << configs[k].string() << "  exit " << codes[k] << "  " << verdicts[k] << "  -> "
                  << (out_root / configs[k].stem()).string() << '\n';
        worst = std::max(worst, codes[k]);
    }
    return worst;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"DC microgrid current sharing and voltage balancing: analysis and simulation"};
    app.require_subcommand(1);

    std::string cfg;
    std::string out_dir = ".";
    auto* check = app.add_subcommand("check", "Gain verdicts, existence certificate and linearized stability");
    check->add_option("config", cfg, "Config file")->required();

    auto* solve = app.add_subcommand("solve", "Solve the steady state and write equilibrium.csv");
    solve->add_option("config", cfg, "Config file")->required();
    solve->add_option("-o,--output", out_dir, "Output directory");

    auto* run = app.add_subcommand("run", "Simulate the scenario and write CSVs, report and plot script");
    run->add_option("config", cfg, "Config file")->required();
    run->add_option("-o,--output", out_dir, "Output directory")->required();

    std::string pattern;
    std::string sweep_out = "sweep_out";
    unsigned jobs = 0;
    auto* sweep = app.add_subcommand("sweep", "Run every config matching a glob in a worker pool");
    sweep->add_option("pattern", pattern, "Glob, quoted so the shell leaves it alone")->required();
    sweep->add_option("-o,--output", sweep_out, "Root directory; one subdirectory per config");
    sweep->add_option("-j,--jobs", jobs, "Worker threads (0 = hardware concurrency)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    if (*check) return guarded([&] { return cmd_check(cfg); });
    if (*solve) return guarded([&] { return cmd_solve(cfg, out_dir); });
    if (*run) return guarded([&] { return cmd_run(cfg, out_dir); });
    return guarded([&] { return cmd_sweep(pattern, sweep_out, jobs); });
}
