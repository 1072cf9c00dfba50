// pulsetrain: synthesis, single-shot period estimation, variance bounds and
// Monte Carlo benchmarks for periodic pulse trains in white Gaussian noise.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ppt/bounds.hpp"
#include "ppt/estimators.hpp"
#include "ppt/io.hpp"
#include "ppt/montecarlo.hpp"
#include "ppt/signal_model.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitPrecondition = 4;

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void extsignal_handler(int) { ppt::request_stop(); }

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
};

ppt::io::Config load_or_empty(const std::string& path) {
    if (path.empty()) return ppt::io::Config{};
    return ppt::io::load_config(path);
}

// Period searched by the estimators: explicit search keys when set, otherwise
// the prior interval.
std::pair<double, double> search_range(const ppt::ExperimentConfig& e) {
    const double lo = e.T_search_low > 0.0 ? e.T_search_low : e.T_low;
    const double hi = e.T_search_high > 0.0 ? e.T_search_high : e.T_high;
    return {lo, hi};
}

double synth_sigma2(const ppt::io::Config& cfg, const ppt::ExperimentConfig& e,
                    const ppt::PulseShape& pulse) {
    if (cfg.has("sigma2")) {
        const double s2 = cfg.get_double("sigma2", 0.0);
        if (s2 < 0.0) throw ppt::io::ConfigError("config: sigma2 must be >= 0");
        return s2;
    }
    if (cfg.has("snr_db_single"))
        return ppt::sigma2_for_config(e, pulse, cfg.get_double("snr_db_single", 0.0));
    return 0.0;
}

int cmd_synth(const CommonOpts& common, const std::string& out_path) {
    const auto cfg = load_or_empty(common.config_path);
    const auto e = ppt::io::experiment_from_config(cfg);

    ppt::PulseTrainParams p;
    p.T = cfg.get_double("T", 0.5 * (e.T_low + e.T_high));
    p.tau0 = cfg.get_double("tau0", 0.0);
    p.A = e.A;
    const auto pulse = ppt::make_gaussian_pulse(e.Tp, e.Ts);
    try {
        ppt::validate_params(p, pulse);
    } catch (const std::invalid_argument& ex) {
        throw ppt::io::ConfigError(std::string("config: ") + ex.what());
    }
    const double sigma2 = synth_sigma2(cfg, e, pulse);
    std::uint64_t seed = cfg.get_u64("seed", e.master_seed);
    if (common.seed) seed = *common.seed;

    const auto clean = ppt::synthesize(p, pulse, e.N, e.Ts);
    const auto meas = ppt::add_noise(clean, e.Ts, sigma2, seed, p);
    ppt::io::write_signal(out_path, meas, ppt::snr_convention_name(e.snr_convention),
                          e.Tp, e.P_R);
    std::cout << "wrote " << out_path << " and " << out_path << ".meta.json\n";
    return kExitOk;
}

void dump_surface(const std::string& path, const ppt::CostSurface& surf) {
    std::string body = "P,n0,cost\n";
    for (std::size_t r = 0; r < surf.rows.size(); ++r) {
        const long long P = surf.P_min + static_cast<long long>(r);
        const auto& row = surf.rows[r];
        for (std::size_t n0 = 0; n0 < row.size(); ++n0) {
            body += std::to_string(P);
            body += ",";
            body += std::to_string(n0);
            body += ",";
            body += ppt::io::format_double(row[n0]);
            body += "\n";
        }
    }
    ppt::io::write_text(path, body);
}

int cmd_estimate(const CommonOpts& common, const std::string& in_path,
                 const std::string& method_str, std::optional<int> np_opt,
                 std::optional<int> pr_opt, const std::string& surface_path) {
    const auto cfg = load_or_empty(common.config_path);
    const auto e = ppt::io::experiment_from_config(cfg);
    const auto method = ppt::method_from_name(method_str);
    if (!method) throw ppt::io::ConfigError("unknown method '" + method_str + "'");

    const auto meas = ppt::io::read_signal(in_path);
    const double Ts = meas.Ts;
    const auto [T_lo, T_hi] = search_range(e);

    ppt::PeriodEstimate est;
    int order = 0;  // Np for the comb methods, Kh for the harmonic ones
    if (*method == ppt::Method::ppks || *method == ppt::Method::ppus) {
        const int pr = pr_opt.value_or(e.P_R);
        if (pr < 1) throw ppt::io::ConfigError("pr must be >= 1");
        const auto tpl = ppt::make_gaussian_pulse(e.Tp, Ts);
        // ppks takes its support from the template; --np only drives ppus
        const int np = *method == ppt::Method::ppks ? tpl.length()
                                                    : np_opt.value_or(tpl.length());
        const double fine_Ts = Ts / pr;
        ppt::GridSpec grid;
        grid.P_min = static_cast<int>(std::llround(T_lo / fine_Ts));
        grid.P_max = static_cast<int>(std::llround(T_hi / fine_Ts));
        ppt::CostSurface surf;
        est = ppt::estimate_with_subgrid(meas, *method, pr, grid, &tpl, np,
                                         surface_path.empty() ? nullptr : &surf);
        if (!surface_path.empty()) dump_surface(surface_path, surf);
        order = np;
    } else {
        if (!surface_path.empty())
            throw ppt::io::ConfigError("--dump-cost-surface applies to the comb methods only");
        ppt::GridSpec grid;
        grid.fft_size = e.fft_size;
        grid.psi_grid = ppt::make_psi_grid(T_lo, T_hi, Ts, e.fft_size);
        const int Kh = ppt::select_model_order(meas, e.Kh_max, grid, e.order_penalty_rho);
        est = *method == ppt::Method::mhus_ml ? ppt::mhus_ml(meas, Kh, grid)
                                              : ppt::mhus_anls(meas, Kh, grid);
        order = Kh;
    }

    std::cout << "method,T_hat,P_hat,n0_hat,cost,order,seed\n";
    std::cout << ppt::method_name(est.method) << "," << ppt::io::format_double(est.T_hat)
              << "," << est.P_hat << "," << est.n0_hat << ","
              << ppt::io::format_double(est.cost) << "," << order << "," << meas.seed
              << "\n";
    return kExitOk;
}

int cmd_bound(const CommonOpts& common) {
    const auto cfg = load_or_empty(common.config_path);
    const auto e = ppt::io::experiment_from_config(cfg);
    const double T = cfg.get_double("T", 0.5 * (e.T_low + e.T_high));
    const auto pulse = ppt::make_gaussian_pulse(e.Tp, e.Ts);
    double sigma2 = 1.0;
    if (cfg.has("sigma2")) {
        sigma2 = cfg.get_double("sigma2", 1.0);
    } else if (cfg.has("snr_db_single")) {
        sigma2 = ppt::sigma2_for_config(e, pulse, cfg.get_double("snr_db_single", 0.0));
    } else if (!e.snr_db.empty()) {
        sigma2 = ppt::sigma2_for_config(e, pulse, e.snr_db.front());
    }
    if (!(sigma2 > 0.0)) throw ppt::io::ConfigError("config: bound needs sigma2 > 0");
    const int K = ppt::pulse_count(e.N, e.Ts, T);

    auto row = [&](const std::string& model, const std::string& param, double value,
                   const std::string& notes) {
        std::cout << model << "," << param << "," << ppt::io::format_double(value) << ","
                  << K << "," << ppt::io::format_double(sigma2) << "," << notes << "\n";
    };

    std::cout << "model,param,value,K,sigma2,notes\n";
    try {
        const auto b = ppt::crlb_period_known_shape(pulse, K, e.A, sigma2, e.N, e.Ts, T);
        row("model1", "var_T", b.exact, "exact");
        row("model1", "var_T", b.approx, "asymptotic");
    } catch (const std::invalid_argument& ex) {
        const std::string msg = ex.what();
        const auto colon = msg.find(": ");
        row("model1", "var_T", std::nan(""),
            colon == std::string::npos ? msg : msg.substr(colon + 2));
    }
    try {
        const auto fim2 = ppt::fim_unknown_shape_closed(pulse, K, sigma2);
        const double lambda = ppt::default_ridge(fim2);
        const auto cov = ppt::regularized_covariance(fim2, lambda);
        row("model2", "var_T", cov(0, 0),
            "ridge " + ppt::io::format_double(lambda));
        const auto diag = ppt::singularity_diagnostic(fim2, pulse);
        row("model2", "null_residual", diag.null_residual, "singularity");
        row("model2", "min_eig", diag.min_eig, "singularity");
        row("model2", "max_eig", diag.max_eig, "singularity");
    } catch (const std::exception& ex) {
        row("model2", "var_T", std::nan(""), ex.what());
    }
    try {
        const auto amps = ppt::harmonic_amplitudes(pulse, e.A, T);
        const auto mh = ppt::crlb_multiharmonic(amps, e.N, sigma2, T, e.Ts);
        row("multiharmonic", "var_T", mh.var_T, "harmonic-sum");
        row("multiharmonic", "var_psi", mh.var_psi, "harmonic-sum");
    } catch (const std::exception& ex) {
        row("multiharmonic", "var_T", std::nan(""), ex.what());
    }
    return kExitOk;
}

std::string plot_data_text(const ppt::MseCurve& curve) {
    std::string out = "# manifest: manifest.txt\n";
    auto series = [&](const std::string& name, const std::vector<double>& ys) {
        out += "\n# series: " + name + "\n";
        for (std::size_t s = 0; s < curve.snr_db.size(); ++s) {
            out += ppt::io::format_double(curve.snr_db[s]);
            out += " ";
            out += ppt::io::format_double(ys[s]);
            out += "\n";
        }
    };
    for (std::size_t mi = 0; mi < curve.methods.size(); ++mi) {
        std::vector<double> ys;
        for (const auto& cell : curve.cells[mi]) ys.push_back(cell.mse);
        series(ppt::method_name(curve.methods[mi]), ys);
    }
    series("crlb_model1", curve.crlb_model1);
    series("crlb_mhus", curve.crlb_mhus);
    return out;
}

// Threshold detection needs a few sweep points; short sweeps report none.
std::optional<double> safe_threshold(const ppt::MseCurve& curve, ppt::Method m,
                                     double factor) {
    try {
        return ppt::detect_threshold(curve, m, factor);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

std::string thresholds_text(const ppt::MseCurve& curve, double factor) {
    std::string out = "method,threshold_db,factor\n";
    for (const auto m : curve.methods) {
        const auto thr = safe_threshold(curve, m, factor);
        out += ppt::method_name(m);
        out += ",";
        out += thr ? ppt::io::format_double(*thr) : "nan";
        out += ",";
        out += ppt::io::format_double(factor);
        out += "\n";
    }
    return out;
}

// Minimal static SVG: MSE (log10) against SNR, solid per-method polylines,
// dashed bound curves.
std::string svg_plot(const ppt::MseCurve& curve) {
    const double W = 760, H = 520, L = 70, R = 170, Tm = 30, B = 50;
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    auto see = [&](double snr, double v) {
        if (!(v > 0.0) || !std::isfinite(v)) return;
        x_lo = std::min(x_lo, snr);
        x_hi = std::max(x_hi, snr);
        y_lo = std::min(y_lo, std::log10(v));
        y_hi = std::max(y_hi, std::log10(v));
    };
    for (std::size_t s = 0; s < curve.snr_db.size(); ++s) {
        for (std::size_t mi = 0; mi < curve.methods.size(); ++mi)
            see(curve.snr_db[s], curve.cells[mi][s].mse);
        see(curve.snr_db[s], curve.crlb_model1[s]);
        see(curve.snr_db[s], curve.crlb_mhus[s]);
    }
    if (x_lo > x_hi) { x_lo = -1; x_hi = 1; y_lo = 0; y_hi = 1; }
    if (x_hi - x_lo < 1e-9) { x_lo -= 1; x_hi += 1; }
    y_lo = std::floor(y_lo) - 0.2;
    y_hi = std::ceil(y_hi) + 0.2;
    auto X = [&](double snr) { return L + (snr - x_lo) / (x_hi - x_lo) * (W - L - R); };
    auto Y = [&](double lv) { return H - B - (lv - y_lo) / (y_hi - y_lo) * (H - Tm - B); };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(static_cast<int>(W)) + "\" height=\"" +
         std::to_string(static_cast<int>(H)) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<!-- manifest: manifest.txt -->\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    char buf[256];
    // axes and grid
    for (double lv = std::ceil(y_lo); lv <= y_hi; lv += 1.0) {
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n",
                      X(x_lo), Y(lv), X(x_hi), Y(lv));
        s += buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">1e%d</text>\n",
                      X(x_lo) - 6, Y(lv) + 4, static_cast<int>(lv));
        s += buf;
    }
    const double xstep = (x_hi - x_lo) > 15 ? 5.0 : 2.0;
    for (double snr = std::ceil(x_lo / xstep) * xstep; snr <= x_hi + 1e-9; snr += xstep) {
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n",
                      X(snr), Y(y_lo), X(snr), Y(y_hi));
        s += buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%g</text>\n",
                      X(snr), H - B + 18, snr);
        s += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"black\"/>\n",
                  L, Tm, W - L - R, H - Tm - B);
    s += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">SNR (dB)</text>\n",
                  L + (W - L - R) / 2, H - 12.0);
    s += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"16\" y=\"%.1f\" transform=\"rotate(-90 16 %.1f)\" text-anchor=\"middle\">period MSE</text>\n",
                  Tm + (H - Tm - B) / 2, Tm + (H - Tm - B) / 2);
    s += buf;

    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};
    auto polyline = [&](const std::vector<double>& ys, const std::string& stroke,
                        bool dashed) {
        std::string pts;
        for (std::size_t i = 0; i < curve.snr_db.size(); ++i) {
            if (!(ys[i] > 0.0) || !std::isfinite(ys[i])) continue;
            std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", X(curve.snr_db[i]),
                          Y(std::log10(ys[i])));
            pts += buf;
        }
        if (pts.empty()) return;
        s += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"2\"";
        if (dashed) s += " stroke-dasharray=\"6 4\"";
        s += " points=\"" + pts + "\"/>\n";
    };
    double legend_y = Tm + 10;
    auto legend = [&](const std::string& name, const std::string& stroke, bool dashed) {
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"2\"%s/>\n",
                      W - R + 12, legend_y, W - R + 44, legend_y, stroke.c_str(),
                      dashed ? " stroke-dasharray=\"6 4\"" : "");
        s += buf;
        std::snprintf(buf, sizeof(buf), "<text x=\"%.1f\" y=\"%.1f\">%s</text>\n",
                      W - R + 50, legend_y + 4, name.c_str());
        s += buf;
        legend_y += 20;
    };
    for (std::size_t mi = 0; mi < curve.methods.size(); ++mi) {
        std::vector<double> ys;
        for (const auto& cell : curve.cells[mi]) ys.push_back(cell.mse);
        const std::string color = palette[mi % 4];
        polyline(ys, color, false);
        legend(ppt::method_name(curve.methods[mi]), color, false);
    }
    polyline(curve.crlb_model1, "black", true);
    legend("bound (pulse)", "black", true);
    polyline(curve.crlb_mhus, "#777777", true);
    legend("bound (harmonic)", "#777777", true);
    s += "</svg>\n";
    return s;
}

int cmd_bench(const CommonOpts& common, const std::string& out_dir,
              const std::string& estimators_override, bool svg,
              const std::string& command_line) {
    if (common.config_path.empty())
        throw ppt::io::ConfigError("bench requires --config");
    const auto cfg = ppt::io::load_config(common.config_path);
    auto e = ppt::io::experiment_from_config(cfg);
    if (common.seed) e.master_seed = *common.seed;
    if (!estimators_override.empty()) {
        e.estimators.clear();
        std::stringstream ss(estimators_override);
        std::string name;
        while (std::getline(ss, name, ',')) {
            const auto m = ppt::method_from_name(name);
            if (!m) throw ppt::io::ConfigError("unknown estimator '" + name + "'");
            e.estimators.push_back(*m);
        }
    }
    try {
        ppt::validate_config(e);
    } catch (const std::invalid_argument& ex) {
        throw ppt::io::ConfigError(std::string("config: ") + ex.what());
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw ppt::io::IoError("cannot create " + out_dir + ": " + ec.message());

    ppt::reset_stop();
    std::signal(SIGINT, extsignal_handler);
    std::signal(SIGTERM, extsignal_handler);
    const auto curve = ppt::run(e);
    std::signal(SIGINT, SIG_DFL);
    std::signal(SIGTERM, SIG_DFL);

    const auto join = [&](const std::string& name) { return out_dir + "/" + name; };
    ppt::io::write_results(join("results.csv"), curve);
    ppt::io::write_text(join("thresholds.csv"), thresholds_text(curve, 10.0));
    ppt::io::write_text(join("plot_data.dat"), plot_data_text(curve));
    if (svg) ppt::io::write_text(join("mse_vs_snr.svg"), svg_plot(curve));

    std::string manifest = "command = " + command_line + "\n";
    manifest += ppt::io::manifest_text(e, curve.complete ? "complete" : "incomplete",
                                       utc_timestamp());
    manifest += "outputs = results.csv,thresholds.csv,plot_data.dat";
    if (svg) manifest += ",mse_vs_snr.svg";
    manifest += "\n";
    ppt::io::write_text(join("manifest.txt"), manifest);

    for (const auto m : curve.methods) {
        const auto thr = safe_threshold(curve, m, 10.0);
        std::cout << ppt::method_name(m) << " threshold: "
                  << (thr ? ppt::io::format_double(*thr) + " dB" : std::string("none"))
                  << "\n";
    }
    if (!curve.complete) {
        std::cout << "interrupted: partial results in " << out_dir << "\n";
        return 130;
    }
    std::cout << "wrote " << out_dir << "/results.csv\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Period estimation for pulse trains in white noise"};
    app.require_subcommand(1);

    CommonOpts common;
    std::uint64_t seed_val = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "key = value config file");
        sub->add_option("--seed", seed_val, "override the seed");
    };

    auto* synth = app.add_subcommand("synth", "synthesize a measurement file");
    std::string out_path = "signal.csv";
    add_common(synth);
    synth->add_option("--out", out_path, "output CSV path")->required();

    auto* estimate = app.add_subcommand("estimate", "estimate the period of a measurement");
    std::string in_path, method_str, surface_path;
    int np_val = 0, pr_val = 0;
    std::optional<int> np_opt, pr_opt;
    add_common(estimate);
    estimate->add_option("--in", in_path, "input signal CSV")->required();
    estimate->add_option("--method", method_str, "ppks | ppus | mhus_ml | anls")->required();
    estimate->add_option("--np", np_val, "pulse support in samples (comb methods)");
    estimate->add_option("--pr", pr_val, "sub-grid resolution factor");
    estimate->add_option("--dump-cost-surface", surface_path,
                         "write the (P, n0) criterion grid to this CSV");

    auto* bound = app.add_subcommand("bound", "print variance lower bounds");
    add_common(bound);

    auto* bench = app.add_subcommand("bench", "Monte Carlo MSE-versus-SNR study");
    std::string bench_out = "bench_out";
    std::string estimators_override;
    bool svg = false;
    add_common(bench);
    bench->add_option("--out", bench_out, "output directory")->required();
    bench->add_option("--estimators", estimators_override,
                      "comma list overriding the configured estimators");
    bench->add_flag("--svg", svg, "also emit a static SVG plot");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    for (CLI::App* sub : {synth, estimate, bound, bench})
        if (sub->count("--seed")) common.seed = seed_val;
    if (estimate->count("--np")) np_opt = np_val;
    if (estimate->count("--pr")) pr_opt = pr_val;

    std::string command_line;
    for (int i = 0; i < argc; ++i) {
        if (i) command_line += " ";
        command_line += argv[i];
    }

    try {
        if (synth->parsed()) return cmd_synth(common, out_path);
        if (estimate->parsed())
            return cmd_estimate(common, in_path, method_str, np_opt, pr_opt, surface_path);
        if (bound->parsed()) return cmd_bound(common);
        if (bench->parsed())
            return cmd_bench(common, bench_out, estimators_override, svg, command_line);
    } catch (const ppt::io::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ppt::io::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPrecondition;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
