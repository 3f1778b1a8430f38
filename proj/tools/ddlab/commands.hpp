#pragma once

// Command implementations for the ddlab tool. Each command validates its configuration,
// computes everything in memory and returns the files to write, so a failure never leaves
// partial output behind.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ddlab/covariance.hpp"
#include "ddlab/designs.hpp"
#include "ddlab/dpcheck.hpp"
#include "ddlab/errors.hpp"
#include "ddlab/experiments.hpp"
#include "ddlab/io.hpp"
#include "ddlab/measure.hpp"
#include "ddlab/random.hpp"
#include "ddlab/surrogate.hpp"

namespace ddlab::cli {

/// Settings shared by all commands. threads, out and svg never influence CSV contents and
/// are therefore left out of file headers.
struct Common {
    std::uint64_t seed = 1;
    std::int64_t trials = -1;  // -1: command default
    unsigned threads = 1;
    std::string out = ".";
    bool svg = false;
};

/// "a:b:step" (inclusive) or "a:b" with step 1.
inline std::vector<Index> parse_range(const std::string& spec) {
    std::vector<long long> parts;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stoll(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw InvalidInput("bad range '" + spec + "': expected start:stop[:step] with integers");
        }
    }
    if (parts.size() < 2 || parts.size() > 3) throw InvalidInput("bad range '" + spec + "': expected start:stop[:step]");
    const long long step = parts.size() == 3 ? parts[2] : 1;
    if (step <= 0 || parts[1] < parts[0]) throw InvalidInput("bad range '" + spec + "'");
    std::vector<Index> out;
    for (long long v = parts[0]; v <= parts[1]; v += step) out.push_back(static_cast<Index>(v));
    return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        if constexpr (std::is_floating_point_v<T>) {
            s += io::fmt(v[i]);
        } else {
            s += std::to_string(v[i]);
        }
    }
    return s;
}

inline Spectrum build_spectrum(ProfileKind kind, Index d, double kappa) {
    if (d < 1) throw InvalidInput("d must be >= 1");
    if (kind == ProfileKind::isotropic || d == 1) return Spectrum::isotropic(d);
    return make_profile_kappa(kind, d, kappa);
}

inline std::filesystem::path out_path(const Common& c, const std::string& name) {
    return std::filesystem::path(c.out) / name;
}

inline std::string dump(const std::function<void(std::ostream&)>& fn) {
    std::ostringstream os;
    fn(os);
    return os.str();
}

// ---------------------------------------------------------------------------------------------
// curve

struct CurveConfig {
    std::string sweep = "n";  // n: vary n at fixed d; d: vary d at fixed n
    std::string profile = "diag_exp";
    std::vector<double> kappa{1.0, 1e2, 1e4};
    Index d = 100;
    Index n = 100;
    std::string n_range = "10:200:10";
    std::vector<Index> n_values;
    std::string d_range = "20:300:10";
    double snr = 1.0;
    double sigma2 = -1.0;  // < 0: derived from snr
    std::vector<double> w_star;  // empty: uniform 1/sqrt(d)
    bool scale_trace = true;
    std::string entry_law = "gaussian";
    bool no_mc = false;
};

struct CurveSeries {
    double kappa = 1.0;
    std::vector<experiments::CurvePoint> points;
};

inline io::Header curve_header(const CurveConfig& c, const Common& com, double kappa, std::int64_t trials) {
    io::Header h{{"command", "curve"},
                 {"sweep", c.sweep},
                 {"profile", c.profile},
                 {"kappa", io::fmt(kappa)}};
    if (c.sweep == "n") {
        h.emplace_back("d", std::to_string(c.d));
        h.emplace_back("n_values", c.n_values.empty() ? c.n_range : join(c.n_values));
    } else {
        h.emplace_back("n", std::to_string(c.n));
        h.emplace_back("d_range", c.d_range);
    }
    h.emplace_back("snr", io::fmt(c.snr));
    h.emplace_back("sigma2", c.sigma2 < 0 ? "from snr" : io::fmt(c.sigma2));
    h.emplace_back("w_star", c.w_star.empty() ? "uniform" : join(c.w_star));
    h.emplace_back("scale_trace", c.scale_trace ? "true" : "false");
    h.emplace_back("entry_law", c.entry_law);
    h.emplace_back("trials", c.no_mc ? "0 (no-mc)" : std::to_string(trials));
    h.emplace_back("seed", std::to_string(com.seed));
    return h;
}

inline RegressionProblem curve_problem(const CurveConfig& c, ProfileKind kind, Index d, double kappa) {
    Spectrum s = build_spectrum(kind, d, kappa);
    if (c.scale_trace) s = scale_trace_inverse(s, static_cast<double>(d));
    Vector w;
    if (c.w_star.empty()) {
        w = uniform_w_star(d);
    } else {
        if (static_cast<Index>(c.w_star.size()) != d) {
            throw InvalidInput("w_star has " + std::to_string(c.w_star.size()) + " entries, expected d = " +
                               std::to_string(d));
        }
        w = Eigen::Map<const Vector>(c.w_star.data(), d);
    }
    double sigma2 = c.sigma2;
    if (sigma2 < 0) {
        if (!(c.snr > 0) || !std::isfinite(c.snr)) throw InvalidInput("snr must be positive");
        sigma2 = w.squaredNorm() / c.snr;
    }
    return RegressionProblem(std::move(s), std::move(w), sigma2);
}

inline io::FileBatch run_curve(CurveConfig c, const Common& com, std::ostream& log) {
    const ProfileKind kind = parse_profile(c.profile);
    const EntryLaw law = parse_entry_law(c.entry_law);
    if (c.sweep != "n" && c.sweep != "d") throw InvalidInput("sweep must be 'n' or 'd'");
    if (kind == ProfileKind::isotropic) c.kappa = {1.0};
    if (c.kappa.empty()) throw InvalidInput("kappa list is empty");
    for (double k : c.kappa)
        if (!(k >= 1.0) || !std::isfinite(k)) throw InvalidInput("kappa must be >= 1");
    const std::int64_t trials = c.no_mc ? 0 : (com.trials < 0 ? 1000 : com.trials);
    if (!c.no_mc && trials < 30) throw InvalidInput("trials must be >= 30 (or use --no-mc)");
    std::vector<Index> grid;
    if (c.sweep == "n") {
        grid = c.n_values.empty() ? parse_range(c.n_range) : c.n_values;
        for (Index n : grid)
            if (n < 1) throw InvalidInput("n values must be >= 1");
        if (c.d < 1) throw InvalidInput("d must be >= 1");
    } else {
        grid = parse_range(c.d_range);
        if (!c.w_star.empty()) throw InvalidInput("explicit w_star is not supported in a d-sweep");
        for (Index d : grid)
            if (d < 1) throw InvalidInput("d values must be >= 1");
    }
    if (c.sweep == "n") curve_problem(c, kind, c.d, c.kappa.front());  // validates w_star and snr up front

    std::vector<CurveSeries> all;
    for (double kappa : c.kappa) {
        CurveSeries s{kappa, {}};
        if (c.sweep == "n") {
            const RegressionProblem p = curve_problem(c, kind, c.d, kappa);
            s.points = experiments::curve_double_descent(p, MeasureSpec{p.spectrum, law}, grid, trials, com.seed,
                                                         com.threads);
        } else {
            for (Index d : grid) {
                const RegressionProblem p = curve_problem(c, kind, d, kappa);
                auto pts = experiments::curve_double_descent(p, MeasureSpec{p.spectrum, law}, {c.n}, trials, com.seed,
                                                             com.threads);
                s.points.push_back(std::move(pts.front()));
            }
        }
        all.push_back(std::move(s));
    }

    io::FileBatch files;
    const bool single = all.size() == 1;
    for (const auto& s : all) {
        const std::string name = single ? "curve.csv" : "curve_k" + io::fmt(s.kappa) + ".csv";
        files.add(out_path(com, name), dump([&](std::ostream& os) {
                      io::write_curve_csv(os, curve_header(c, com, s.kappa, trials), s.points);
                  }));
        if (trials > 0) {
            for (const auto& p : s.points) {
                log << "kappa=" << io::fmt(s.kappa) << " n=" << p.n << " d=" << p.d
                    << " mse_surrogate=" << io::fmt(p.mse_surrogate) << " mc_mean=" << io::fmt(p.mse_mc->mean)
                    << " mc_median=" << io::fmt(p.mse_mc->median) << " mc_trimmed=" << io::fmt(p.mse_mc->trimmed_mean)
                    << '\n';
            }
        }
    }
    if (com.svg) {
        io::Chart chart;
        chart.title = c.sweep == "n" ? "Surrogate MSE vs n (d = " + std::to_string(c.d) + ")"
                                     : "Surrogate MSE vs d (n = " + std::to_string(c.n) + ")";
        chart.x_label = c.sweep == "n" ? "n" : "d";
        chart.y_label = "MSE";
        chart.log_y = true;
        for (const auto& s : all) {
            io::Series line{"surrogate k=" + io::fmt(s.kappa), {}, {}, {}, {}, false};
            io::Series mc{"i.i.d. MC k=" + io::fmt(s.kappa), {}, {}, {}, {}, true};
            for (const auto& p : s.points) {
                const double x = static_cast<double>(c.sweep == "n" ? p.n : p.d);
                line.x.push_back(x);
                line.y.push_back(p.mse_surrogate);
                if (p.mse_mc) {
                    mc.x.push_back(x);
                    mc.y.push_back(p.mse_mc->mean);
                    mc.err_low.push_back(p.mse_mc->mean - 3.0 * p.mse_mc->std_error);
                    mc.err_high.push_back(p.mse_mc->mean + 3.0 * p.mse_mc->std_error);
                }
            }
            chart.series.push_back(std::move(line));
            if (!mc.x.empty()) chart.series.push_back(std::move(mc));
        }
        const double null_mse = c.sweep == "n" ? curve_problem(c, kind, c.d, c.kappa.front()).w_star.squaredNorm()
                                               : 1.0;  // uniform w* has unit norm at every d
        chart.hlines.emplace_back("null estimator", null_mse);
        files.add(out_path(com, "curve.svg"), io::render_svg(chart));
    }
    return files;
}

// ---------------------------------------------------------------------------------------------
// discrepancy

struct DiscrepancyConfig {
    std::string kind = "variance";  // variance | bias | both
    std::string profile = "isotropic";
    double kappa = 1e4;
    std::vector<double> aspects{0.25, 0.5, 0.75};
    std::vector<Index> d_values{10, 20, 40, 80, 160};
    Index bias_d_cap = 64;
    std::int64_t trial_cap = 0;  // 0: per-kind default
    double target = 0.125;
    std::string entry_law = "gaussian";
};

struct DiscrepancyResult {
    std::vector<experiments::DiscrepancyPoint> points;
    std::vector<std::string> summary;
};

inline std::uint64_t discrepancy_seed(std::uint64_t seed, experiments::DiscrepancyKind k, Index d, double aspect) {
    const auto a = static_cast<std::uint64_t>(std::llround(aspect * 1e6));
    const std::uint64_t key = (static_cast<std::uint64_t>(k) << 60) ^ (static_cast<std::uint64_t>(d) << 32) ^ a;
    return random::derive_seed(seed, random::stream::kAuxiliary, key);
}

inline io::Header discrepancy_header(const DiscrepancyConfig& c, const Common& com, std::int64_t min_trials) {
    return {{"command", "discrepancy"},
            {"kind", c.kind},
            {"profile", c.profile},
            {"kappa", io::fmt(c.kappa)},
            {"aspects", join(c.aspects)},
            {"d_values", join(c.d_values)},
            {"bias_d_cap", std::to_string(c.bias_d_cap)},
            {"min_trials", std::to_string(min_trials)},
            {"trial_cap", c.trial_cap > 0 ? std::to_string(c.trial_cap) : "default"},
            {"target_rel_halfwidth", io::fmt(c.target)},
            {"entry_law", c.entry_law},
            {"seed", std::to_string(com.seed)}};
}

inline DiscrepancyResult compute_discrepancy(const DiscrepancyConfig& c, const Common& com, std::ostream& log) {
    using experiments::DiscrepancyKind;
    const ProfileKind prof = parse_profile(c.profile);
    const EntryLaw law = parse_entry_law(c.entry_law);
    std::vector<DiscrepancyKind> kinds;
    if (c.kind == "variance" || c.kind == "both") kinds.push_back(DiscrepancyKind::variance);
    if (c.kind == "bias" || c.kind == "both") kinds.push_back(DiscrepancyKind::bias);
    if (kinds.empty()) throw InvalidInput("kind must be variance, bias or both");
    if (c.aspects.empty() || c.d_values.empty()) throw InvalidInput("aspects and d_values must be non-empty");
    if (!(c.target > 0)) throw InvalidInput("target must be positive");
    const std::int64_t min_trials = com.trials < 0 ? 250 : com.trials;
    if (min_trials < 64) throw InvalidInput("trials must be >= 64 for discrepancies");
    for (Index d : c.d_values)
        for (double a : c.aspects) experiments::sample_size_for(d, a);  // validates the grid up front
    if (prof == ProfileKind::isotropic &&
        std::find(kinds.begin(), kinds.end(), DiscrepancyKind::bias) != kinds.end()) {
        log << "warning: the bias discrepancy vanishes identically for an isotropic covariance; "
               "estimates are pure Monte Carlo noise\n";
    }

    DiscrepancyResult res;
    for (DiscrepancyKind k : kinds) {
        const std::int64_t cap =
            c.trial_cap > 0 ? c.trial_cap : (k == DiscrepancyKind::variance ? 100'000 : 1'000'000);
        for (double aspect : c.aspects) {
            std::vector<experiments::DiscrepancyPoint> row;
            for (Index d : c.d_values) {
                const Spectrum s = build_spectrum(prof, d, c.kappa);
                const std::uint64_t seed = discrepancy_seed(com.seed, k, d, aspect);
                experiments::DiscrepancyPoint pt;
                if (k == DiscrepancyKind::variance) {
                    experiments::VarianceDiscrepancy v(s, aspect, seed, com.threads, law);
                    pt = experiments::adaptive_trials([&](std::int64_t t) { return v.run(t); }, min_trials, cap,
                                                      c.target);
                } else {
                    experiments::BiasDiscrepancy b(s, aspect, seed, com.threads, law);
                    if (d > c.bias_d_cap) {
                        pt = b.run(min_trials);
                        pt.flagged = true;
                        pt.flag = "d_cap_exceeded";
                        log << "warning: bias point d=" << d << " exceeds the cap " << c.bias_d_cap
                            << "; ran " << min_trials << " trials only\n";
                    } else {
                        pt = experiments::adaptive_trials([&](std::int64_t t) { return b.run(t); }, min_trials, cap,
                                                          c.target);
                    }
                }
                if (pt.flag == "cap_reached") {
                    log << "warning: " << experiments::to_string(k) << " point d=" << d << " aspect="
                        << io::fmt(aspect) << " reached the trial cap " << cap << '\n';
                }
                row.push_back(pt);
                res.points.push_back(pt);
            }
            std::ostringstream line;
            line << "slope " << experiments::to_string(k) << " aspect=" << io::fmt(aspect) << ": ";
            try {
                const auto fit = experiments::loglog_slope(row);
                line.precision(4);
                line << fit.slope << " (r2=" << fit.r2 << ", points=" << fit.used;
                if (fit.excluded) line << ", excluded=" << fit.excluded;
                line << ")";
            } catch (const InvalidInput& e) {
                line << "unavailable (" << e.what() << ")";
            }
            res.summary.push_back(line.str());
        }
    }
    return res;
}

inline io::FileBatch run_discrepancy(const DiscrepancyConfig& c, const Common& com, std::ostream& log) {
    const DiscrepancyResult res = compute_discrepancy(c, com, log);
    const std::int64_t min_trials = com.trials < 0 ? 250 : com.trials;
    for (const auto& s : res.summary) log << s << '\n';
    io::FileBatch files;
    files.add(out_path(com, "discrepancy.csv"), dump([&](std::ostream& os) {
                  io::write_discrepancy_csv(os, discrepancy_header(c, com, min_trials), res.points);
              }));
    if (com.svg) {
        io::Chart chart;
        chart.title = "Discrepancy vs d (" + c.profile + ")";
        chart.x_label = "d";
        chart.y_label = "discrepancy";
        chart.log_x = chart.log_y = true;
        std::map<std::pair<int, double>, io::Series> by;
        for (const auto& p : res.points) {
            auto& s = by[{static_cast<int>(p.kind), p.aspect}];
            s.label = std::string(experiments::to_string(p.kind)) + " n/d=" + io::fmt(p.aspect);
            s.x.push_back(static_cast<double>(p.d));
            s.y.push_back(p.value);
            s.err_low.push_back(p.ci_low);
            s.err_high.push_back(p.ci_high);
        }
        for (auto& [key, s] : by) chart.series.push_back(std::move(s));
        files.add(out_path(com, "discrepancy.svg"), io::render_svg(chart));
    }
    return files;
}

// ---------------------------------------------------------------------------------------------
// dp-verify

struct DpConfig {
    std::string scenario;
    Index d = 0;  // 0: scenario default
    double gamma = -1.0;  // < 0: scenario default
    double sigma2 = 1.0;
    std::string profile = "isotropic";
    double kappa = 10.0;
    std::vector<Index> minor_sizes;
    long fixed_k = -1;
};

inline const std::vector<std::string>& dp_scenarios() {
    static const std::vector<std::string> names{"gaussian_entries", "rank1_scaled", "rank2_scaled_counterexample",
                                                "poisson_gram",     "normalization", "closure_sum",
                                                "closure_product"};
    return names;
}

inline io::FileBatch run_dp_verify(DpConfig c, const Common& com, std::ostream& log) {
    const auto& names = dp_scenarios();
    if (std::find(names.begin(), names.end(), c.scenario) == names.end()) {
        std::string all;
        for (const auto& n : names) all += (all.empty() ? "" : ", ") + n;
        throw InvalidInput("unknown scenario '" + c.scenario + "' (expected one of: " + all + ")");
    }
    const std::int64_t trials = com.trials < 0 ? 100'000 : com.trials;
    const ProfileKind prof = parse_profile(c.profile);
    if (!(c.sigma2 > 0)) throw InvalidInput("sigma2 must be positive");

    if (c.d == 0) {
        if (c.scenario == "poisson_gram" || c.scenario == "closure_product") c.d = 2;
        else if (c.scenario == "normalization") c.d = 1;
        else c.d = 3;
    }
    if (c.d < 1) throw InvalidInput("d must be >= 1");
    if (c.gamma < 0) c.gamma = c.scenario == "poisson_gram" ? 3.0 : 1.0;
    auto spectrum = [&] { return build_spectrum(prof, c.d, c.kappa).scaled(c.sigma2); };

    io::Header h{{"command", "dp-verify"}, {"scenario", c.scenario}, {"d", std::to_string(c.d)}};
    const bool uses_measure = c.scenario == "poisson_gram" || c.scenario == "normalization";
    if (uses_measure) {
        h.emplace_back("gamma", io::fmt(c.gamma));
        h.emplace_back("sigma2", io::fmt(c.sigma2));
        h.emplace_back("profile", c.profile);
        if (prof != ProfileKind::isotropic) h.emplace_back("kappa", io::fmt(c.kappa));
    }
    if (c.scenario == "poisson_gram" && c.fixed_k >= 0) h.emplace_back("fixed_k", std::to_string(c.fixed_k));
    if (!c.minor_sizes.empty()) h.emplace_back("minor_sizes", join(c.minor_sizes));
    h.emplace_back("trials", std::to_string(trials));
    h.emplace_back("seed", std::to_string(com.seed));

    io::FileBatch files;
    const auto path = out_path(com, "dp_" + c.scenario + ".csv");
    if (c.scenario == "normalization") {
        const auto chk = dp::verify_normalization(MeasureSpec{spectrum()}, c.gamma, trials, com.seed, com.threads);
        log << "normalization: estimate " << io::fmt(chk.estimate.value()) << " +/- " << io::fmt(chk.estimate.se())
            << ", target " << io::fmt(chk.target) << ", z = " << io::fmt(chk.z) << '\n';
        log << "verdict: " << (std::abs(chk.z) <= 3.0 ? "consistent" : "violated") << " (3 SE rule)\n";
        files.add(path, dump([&](std::ostream& os) {
                      io::write_header(os, h);
                      os << "gamma,d,estimate,se,target,z\n";
                      os << io::fmt(c.gamma) << ',' << c.d << ',' << io::fmt(chk.estimate.value()) << ','
                         << io::fmt(chk.estimate.se()) << ',' << io::fmt(chk.target) << ',' << io::fmt(chk.z) << '\n';
                  }));
        return files;
    }

    if (trials < dp::kMinDpTrials) throw InvalidInput("dp-verify needs at least 10000 trials");
    dp::DpReport rep;
    if (c.scenario == "gaussian_entries") {
        rep = dp::verify_dp(dp::gaussian_entries(c.d), c.minor_sizes, trials, com.seed, com.threads);
    } else if (c.scenario == "rank1_scaled") {
        rep = dp::verify_dp(dp::rank_scaled(c.d, 1), c.minor_sizes, trials, com.seed, com.threads);
    } else if (c.scenario == "rank2_scaled_counterexample") {
        if (c.d < 2) throw InvalidInput("the rank-2 counterexample needs d >= 2");
        rep = dp::verify_dp(dp::rank_scaled(c.d, 2), c.minor_sizes, trials, com.seed, com.threads);
    } else if (c.scenario == "poisson_gram") {
        if (!(c.gamma > 0)) throw InvalidInput("gamma must be positive");
        rep = dp::verify_poisson_identity(MeasureSpec{spectrum()}, c.gamma, trials, com.seed, com.threads, c.fixed_k);
    } else if (c.scenario == "closure_sum") {
        rep = dp::verify_closure(dp::rank_scaled(c.d, 1), dp::gaussian_entries(c.d), dp::Combine::sum, trials,
                                 com.seed, com.threads);
    } else {
        rep = dp::verify_closure(dp::gaussian_entries(c.d), dp::gaussian_entries(c.d), dp::Combine::product, trials,
                                 com.seed, com.threads);
    }
    log << "generator: " << rep.generator << ", d = " << rep.dim << ", " << rep.records.size() << " minors, "
        << rep.trials << " trials\n";
    if (!std::isnan(rep.target)) {
        for (const auto& r : rep.records) {
            if (r.size != rep.dim) continue;
            log << "full minor: E[det] = " << io::fmt(r.mc_mean) << " +/- " << io::fmt(r.mc_se)
                << ", det(E) = " << io::fmt(r.det_of_mean) << ", target det(gamma Sigma) = " << io::fmt(rep.target)
                << '\n';
        }
    }
    if (!rep.note.empty()) log << "note: " << rep.note << '\n';
    log << "verdict: " << dp::to_string(rep.verdict) << " (max |z| = " << io::fmt(rep.max_abs_z)
        << ", threshold = " << io::fmt(rep.threshold) << ")\n";
    files.add(path, dump([&](std::ostream& os) { io::write_dp_csv(os, h, rep); }));
    return files;
}

// ---------------------------------------------------------------------------------------------
// sample

struct SampleConfig {
    Index n = 5;
    Index d = 10;
    std::string profile = "isotropic";
    double kappa = 10.0;
    std::string entry_law = "gaussian";
    std::int64_t chain_steps = 0;
    double sigma2 = 1.0;
    std::vector<double> w_star;
    std::int64_t repeat = 0;  // > 0: harness mode
};

inline io::FileBatch run_sample(const SampleConfig& c, const Common& com, std::ostream& log) {
    if (c.n < 0 || c.d < 1) throw InvalidInput("need n >= 0 and d >= 1");
    if (c.n == 0) throw InvalidInput("n must be >= 1");
    if (c.chain_steps < 0) throw InvalidInput("chain_steps must be >= 0");
    if (!(c.sigma2 >= 0)) throw InvalidInput("sigma2 must be >= 0");
    const MeasureSpec m{build_spectrum(parse_profile(c.profile), c.d, c.kappa), parse_entry_law(c.entry_law)};
    if (c.n < c.d && !m.is_gaussian()) {
        throw UnsupportedMeasure("sampling below d requires a Gaussian measure (got " + c.entry_law + ")");
    }
    Vector w = c.w_star.empty() ? uniform_w_star(c.d) : Eigen::Map<const Vector>(c.w_star.data(), c.w_star.size());
    if (w.size() != c.d) throw InvalidInput("w_star must have d entries");
    const std::string regime = c.n < c.d ? "under" : (c.n == c.d ? "boundary" : "over");

    io::Header h{{"command", "sample"},        {"n", std::to_string(c.n)},
                 {"d", std::to_string(c.d)},   {"profile", c.profile},
                 {"kappa", io::fmt(c.kappa)},  {"entry_law", c.entry_law},
                 {"chain_steps", c.chain_steps ? std::to_string(c.chain_steps) : "default (100 per row)"},
                 {"sigma2", io::fmt(c.sigma2)}, {"w_star", c.w_star.empty() ? "uniform" : join(c.w_star)},
                 {"regime", regime},           {"seed", std::to_string(com.seed)}};
    io::FileBatch files;

    if (c.repeat > 0) {
        h.emplace_back("repeat", std::to_string(c.repeat));
        std::vector<Index> ks(static_cast<std::size_t>(c.repeat));
        std::vector<double> rates(ks.size());
        random::parallel_for(c.repeat, com.threads, [&](std::int64_t i) {
            const SurrogateDraw dr = sample_surrogate(
                m, c.n, c.chain_steps, random::derive_seed(com.seed, random::stream::kAuxiliary, static_cast<std::uint64_t>(i)));
            ks[static_cast<std::size_t>(i)] = dr.k();
            rates[static_cast<std::size_t>(i)] = dr.acceptance_rate();
        });
        std::vector<double> kd(ks.begin(), ks.end());
        const double mean = stats::mean(kd);
        const double se = stats::standard_error(kd);
        log << "repeat " << c.repeat << ": mean k = " << io::fmt(mean) << " +/- " << io::fmt(se) << " (n = " << c.n
            << ", z = " << io::fmt(se > 0 ? (mean - c.n) / se : 0.0) << ")\n";
        files.add(out_path(com, "sample_repeat.csv"), dump([&](std::ostream& os) {
                      io::write_header(os, h);
                      os << "draw,k,acceptance_rate\n";
                      for (std::size_t i = 0; i < ks.size(); ++i) os << i << ',' << ks[i] << ',' << io::fmt(rates[i]) << '\n';
                  }));
        return files;
    }

    const SurrogateDraw dr = sample_surrogate(m, c.n, c.chain_steps, com.seed);
    const Vector y = gen_responses(dr.x, w, c.sigma2, com.seed);
    const auto block_rows = std::count(dr.from_block.begin(), dr.from_block.end(), true);
    log << "regime " << regime << ": k = " << dr.k() << ", chain steps = " << dr.steps
        << ", acceptance rate = " << io::fmt(dr.acceptance_rate()) << '\n';
    files.add(out_path(com, "sample.csv"), dump([&](std::ostream& os) { io::write_design_csv(os, h, dr.x, y); }));
    files.add(out_path(com, "sample_summary.txt"), dump([&](std::ostream& os) {
                  io::write_header(os, h);
                  os << "k = " << dr.k() << '\n';
                  os << "chain_steps = " << dr.steps << '\n';
                  os << "accepted = " << dr.accepted << '\n';
                  os << "acceptance_rate = " << io::fmt(dr.acceptance_rate()) << '\n';
                  if (regime != "under") os << "block_rows = " << block_rows << '\n';
              }));
    return files;
}

}  // namespace ddlab::cli
