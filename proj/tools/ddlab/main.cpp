#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace ddlab;

namespace {

void add_common(CLI::App* sub, cli::Common& c) {
    sub->add_option("--seed", c.seed, "Master seed")->capture_default_str();
    sub->add_option("--trials", c.trials, "Monte Carlo trials (command default if omitted)");
    sub->add_option("--threads", c.threads, "Worker threads (default: DDLAB_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", c.out, "Output directory")->capture_default_str();
    sub->add_flag("--svg", c.svg, "Also write an SVG chart");
}

int report(const std::exception& e, int code) {
    std::cerr << "ddlab: error: " << e.what() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Surrogate random designs for double descent"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "INI file with one section per command; command-line flags win");
    app.allow_config_extras(CLI::config_extras_mode::error);

    cli::Common common;
    common.threads = random::default_threads();

    cli::CurveConfig curve;
    auto* c = app.add_subcommand("curve", "Surrogate MSE curve with optional i.i.d. Monte Carlo");
    add_common(c, common);
    c->add_option("--sweep", curve.sweep, "Vary n (fixed d) or d (fixed n)")
        ->check(CLI::IsMember({"n", "d"}))
        ->capture_default_str();
    c->add_option("--profile", curve.profile, "Covariance profile")->capture_default_str();
    c->add_option("--kappa", curve.kappa, "Condition numbers, one series each")->delimiter(',');
    c->add_option("--d", curve.d, "Dimension for an n-sweep")->capture_default_str();
    c->add_option("--n", curve.n, "Sample size for a d-sweep")->capture_default_str();
    c->add_option("--n-range", curve.n_range, "start:stop[:step]")->capture_default_str();
    c->add_option("--n-values", curve.n_values, "Explicit n list (overrides --n-range)")->delimiter(',');
    c->add_option("--d-range", curve.d_range, "start:stop[:step] for a d-sweep")->capture_default_str();
    c->add_option("--snr", curve.snr, "||w*||^2 / sigma^2")->capture_default_str();
    c->add_option("--sigma2", curve.sigma2, "Noise variance (overrides --snr)");
    c->add_option("--w-star", curve.w_star, "Explicit w* (default 1/sqrt(d) in every coordinate)")->delimiter(',');
    c->add_option("--scale-trace", curve.scale_trace, "Rescale so that tr(Sigma^-1) = d")->capture_default_str();
    c->add_option("--entry-law", curve.entry_law, "gaussian, rademacher or uniform")->capture_default_str();
    c->add_flag("--no-mc", curve.no_mc, "Surrogate only");

    cli::DiscrepancyConfig disc;
    auto* s = app.add_subcommand("discrepancy", "Surrogate vs i.i.d. discrepancy scaling in d");
    add_common(s, common);
    s->add_option("--kind", disc.kind, "variance, bias or both")
        ->check(CLI::IsMember({"variance", "bias", "both"}))
        ->capture_default_str();
    s->add_option("--profile", disc.profile, "Covariance profile")->capture_default_str();
    s->add_option("--kappa", disc.kappa, "Condition number")->capture_default_str();
    s->add_option("--aspects", disc.aspects, "n/d ratios")->delimiter(',');
    s->add_option("--d-values", disc.d_values, "Dimensions")->delimiter(',');
    s->add_option("--bias-d-cap", disc.bias_d_cap, "Largest d for adaptive bias runs")->capture_default_str();
    s->add_option("--trial-cap", disc.trial_cap, "Per-point trial cap (default 1e5 variance, 1e6 bias)");
    s->add_option("--target", disc.target, "Target relative CI half-width")->capture_default_str();
    s->add_option("--entry-law", disc.entry_law, "gaussian, rademacher or uniform")->capture_default_str();

    cli::DpConfig dpc;
    auto* v = app.add_subcommand("dp-verify", "Monte Carlo check of determinant preservation");
    add_common(v, common);
    v->add_option("--scenario", dpc.scenario, "Scenario name")->required()->check(CLI::IsMember(cli::dp_scenarios()));
    v->add_option("--d", dpc.d, "Dimension (scenario default if omitted)");
    v->add_option("--gamma", dpc.gamma, "Poisson rate (scenario default if omitted)");
    v->add_option("--sigma2", dpc.sigma2, "Covariance scale")->capture_default_str();
    v->add_option("--profile", dpc.profile, "Covariance profile")->capture_default_str();
    v->add_option("--kappa", dpc.kappa, "Condition number")->capture_default_str();
    v->add_option("--minor-sizes", dpc.minor_sizes, "Minor sizes to test (default: all)")->delimiter(',');
    v->add_option("--fixed-k", dpc.fixed_k, "Replace the Poisson size by a constant (control)");

    cli::SampleConfig smp;
    auto* p = app.add_subcommand("sample", "Draw one surrogate design");
    add_common(p, common);
    p->add_option("--n", smp.n, "Sample size")->capture_default_str();
    p->add_option("--d", smp.d, "Dimension")->capture_default_str();
    p->add_option("--profile", smp.profile, "Covariance profile")->capture_default_str();
    p->add_option("--kappa", smp.kappa, "Condition number")->capture_default_str();
    p->add_option("--entry-law", smp.entry_law, "gaussian, rademacher or uniform")->capture_default_str();
    p->add_option("--chain-steps", smp.chain_steps, "Metropolis steps (0: 100 per row)")->capture_default_str();
    p->add_option("--sigma2", smp.sigma2, "Noise variance")->capture_default_str();
    p->add_option("--w-star", smp.w_star, "Explicit w*")->delimiter(',');
    p->add_option("--repeat", smp.repeat, "Draw this many designs and report mean k");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        io::FileBatch files;
        if (c->parsed()) files = cli::run_curve(curve, common, std::cout);
        else if (s->parsed()) files = cli::run_discrepancy(disc, common, std::cout);
        else if (v->parsed()) files = cli::run_dp_verify(dpc, common, std::cout);
        else files = cli::run_sample(smp, common, std::cout);
        for (const auto& f : files.commit()) std::cout << "wrote " << f.string() << '\n';
        return 0;
    } catch (const InvalidInput& e) {
        return report(e, 1);
    } catch (const DomainError& e) {
        return report(e, 1);
    } catch (const UnsupportedMeasure& e) {
        return report(e, 1);
    } catch (const std::exception& e) {
        return report(e, 2);
    }
}
