/*
 * Copyright 2026 The pmaf Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// pmaf <experiment> --sizes 2x2,64x32 --samples 1000 --seed 7 --precision f64
//      --out report.csv [solver flags] [--workers N] [--json config.json]
//
// Exit codes: 0 success, 1 check failure, 2 I/O or configuration error.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "pmaf/bench.hpp"
#include "pmaf/error.hpp"

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;

struct CliOptions
{
    std::string sizes;
    std::size_t samples = 0;
    std::uint64_t seed = 7;
    std::string precision = "f64";
    std::string out;
    std::string trace_out;
    std::string json_out;
    std::size_t workers = 1;

    bool rm = false;
    bool dw = false;
    std::string bls = "off";
    bool twd = false;
    double alpha = 0.5;
    double beta_bls = 0.8;
    double beta_twd = 0.9;
    double tol = 1e-7;
    std::size_t max_iters = 100;

    double ied_tol = pmaf::kIedDefaultTol;
    std::size_t ied_max_iters = pmaf::kIedDefaultMaxIters;
    std::string sign = "hardcoded";
    std::string dist = "gaussian";
    bool nonsymmetric = false;

    bool no_less = false;
    bool no_ied = false;
    std::vector<double> instance;
    bool corrupt = false;
};

std::string default_sizes(pmaf::Experiment e)
{
    switch (e) {
        case pmaf::Experiment::LessCompare: return "2x2,64x32";
        case pmaf::Experiment::IedPrecision: return "32x32,64x64,128x128";
        case pmaf::Experiment::BackwardBench: return "8x64,64x64";
        case pmaf::Experiment::CaseStudy: return "2x2";
        case pmaf::Experiment::GradCheck: return "4x3,8x4,8x8";
    }
    return "2x2";
}

std::size_t default_samples(pmaf::Experiment e)
{
    switch (e) {
        case pmaf::Experiment::LessCompare: return 1000;
        case pmaf::Experiment::IedPrecision: return 5;
        case pmaf::Experiment::BackwardBench: return 100;
        case pmaf::Experiment::CaseStudy: return 1;
        case pmaf::Experiment::GradCheck: return 20;
    }
    return 1;
}

pmaf::SignMode parse_sign(const std::string& s)
{
    if (s == "none") {
        return pmaf::SignMode::None;
    }
    if (s == "historical") {
        return pmaf::SignMode::Historical;
    }
    if (s == "hardcoded") {
        return pmaf::SignMode::HardCoded;
    }
    throw pmaf::InvalidConfigError("sign mode must be none, historical or hardcoded");
}

pmaf::BlsMode parse_bls(const std::string& s)
{
    if (s == "off") {
        return pmaf::BlsMode::Off;
    }
    if (s == "one") {
        return pmaf::BlsMode::EtaOne;
    }
    if (s == "derived") {
        return pmaf::BlsMode::EtaDerived;
    }
    throw pmaf::InvalidConfigError("bls must be off, one or derived");
}

pmaf::ExperimentConfig build_config(pmaf::Experiment e, const CliOptions& o)
{
    pmaf::ExperimentConfig cfg;
    cfg.experiment = e;
    cfg.sizes = pmaf::parse_sizes(o.sizes.empty() ? default_sizes(e) : o.sizes);
    cfg.n_samples = o.samples == 0 ? default_samples(e) : o.samples;
    cfg.seed = o.seed;
    cfg.precision = pmaf::parse_precision(o.precision);
    cfg.workers = o.workers;
    cfg.output_path = o.out;

    cfg.less.use_rm = o.rm;
    cfg.less.use_dw = o.dw;
    cfg.less.bls = parse_bls(o.bls);
    cfg.less.use_twd = o.twd;
    cfg.less.alpha = o.alpha;
    cfg.less.beta_bls = o.beta_bls;
    cfg.less.beta_twd = o.beta_twd;
    cfg.less.tol = o.tol;
    cfg.less.max_iters = o.max_iters;

    cfg.ied_tol = o.ied_tol;
    cfg.ied_max_iters = o.ied_max_iters;
    cfg.sign_mode = parse_sign(o.sign);
    cfg.dist = pmaf::parse_distribution(o.dist);
    cfg.symmetric = !o.nonsymmetric;

    cfg.bench_less = !o.no_less;
    cfg.bench_ied = !o.no_ied;
    cfg.byte_budget = pmaf::byte_budget_from_env();
    cfg.corrupt_gradient = o.corrupt;

    if (!o.instance.empty()) {
        if (cfg.sizes.size() != 1) {
            throw pmaf::InvalidConfigError("--instance needs exactly one size m x n");
        }
        const auto [m, n] = cfg.sizes.front();
        if (o.instance.size() != m * n + m) {
            throw pmaf::InvalidConfigError("--instance needs m*n entries of A then m entries of b");
        }
        pmaf::Matrix a(m, n, std::span<const double>(o.instance.data(), m * n));
        auto b = pmaf::Vector::from(std::span<const double>(o.instance.data() + m * n, m));
        cfg.case_instance = pmaf::LessProblem<double>(std::move(a), std::move(b));
    }
    if (e != pmaf::Experiment::CaseStudy) {
        cfg.validate();
    }
    return cfg;
}

nlohmann::json config_json(const pmaf::ExperimentConfig& cfg)
{
    nlohmann::json j;
    j["experiment"] = std::string(pmaf::to_string(cfg.experiment));
    j["sizes"] = pmaf::format_sizes(cfg.sizes);
    j["samples"] = cfg.n_samples;
    j["seed"] = cfg.seed;
    j["precision"] = std::string(pmaf::to_string(cfg.precision));
    j["workers"] = cfg.workers;
    j["output"] = cfg.output_path;
    j["less"] = {{"rm", cfg.less.use_rm},
                 {"dw", cfg.less.use_dw},
                 {"bls", static_cast<int>(cfg.less.bls)},
                 {"twd", cfg.less.use_twd},
                 {"alpha", cfg.less.alpha},
                 {"beta_bls", cfg.less.beta_bls},
                 {"beta_twd", cfg.less.beta_twd},
                 {"tol", cfg.less.tol},
                 {"max_iters", cfg.less.max_iters},
                 {"max_backtracks", cfg.less.max_backtracks},
                 {"label", cfg.less.label()}};
    j["ied"] = {{"tol", cfg.ied_tol},
                {"max_iters", cfg.ied_max_iters},
                {"sign_mode", static_cast<int>(cfg.sign_mode)},
                {"symmetric", cfg.symmetric}};
    j["distribution"] = std::string(pmaf::to_string(cfg.dist));
    j["bench_less"] = cfg.bench_less;
    j["bench_ied"] = cfg.bench_ied;
    j["byte_budget"] = cfg.byte_budget;
    j["corrupt_gradient"] = cfg.corrupt_gradient;
    if (cfg.case_instance) {
        const auto& p = *cfg.case_instance;
        j["instance"] = {{"A", std::vector<double>(p.A.span().begin(), p.A.span().end())},
                         {"b", std::vector<double>(p.b.span().begin(), p.b.span().end())}};
    }
    return j;
}

void print_summary(const pmaf::ExperimentReport& rep)
{
    for (const auto& r : rep.rows) {
        std::cout << r.method << ' ' << r.m << 'x' << r.n;
        switch (rep.experiment) {
            case pmaf::Experiment::LessCompare:
                std::cout << " In=" << r.in << " Out=" << r.out << " Imp=" << r.imp
                          << " MRE=" << pmaf::format_double(r.mre);
                break;
            case pmaf::Experiment::IedPrecision:
                std::cout << " eig_dist=" << pmaf::format_double(r.mean_eig_dist)
                          << " fpd=" << pmaf::format_double(r.mean_fpd)
                          << " lambda_rel_err=" << pmaf::format_double(r.max_rel_err);
                break;
            case pmaf::Experiment::BackwardBench:
                if (r.available) {
                    std::cout << " backward_s=" << pmaf::format_double(r.backward_s)
                              << " peak_bytes=" << r.peak_bytes;
                } else {
                    std::cout << " -";
                }
                break;
            case pmaf::Experiment::CaseStudy:
                std::cout << " iterations=" << r.iterations
                          << " fpd=" << pmaf::format_double(r.mean_fpd);
                break;
            case pmaf::Experiment::GradCheck:
                std::cout << " max_rel_err=" << pmaf::format_double(r.max_rel_err)
                          << (r.passed ? " ok" : " FAIL seed=" + std::to_string(r.failing_seed));
                break;
        }
        std::cout << '\n';
    }
    for (const auto& n : rep.notes) {
        std::cout << "note: " << n << '\n';
    }
}

bool write_file(const std::string& path, const std::function<void(std::ostream&)>& fn)
{
    std::ofstream os(path);
    if (!os) {
        std::cerr << "pmaf: cannot open '" << path << "' for writing\n";
        return false;
    }
    fn(os);
    os.flush();
    if (!os) {
        std::cerr << "pmaf: write to '" << path << "' failed\n";
        return false;
    }
    return true;
}

int run(pmaf::Experiment e, const CliOptions& o)
{
    pmaf::ExperimentConfig cfg;
    pmaf::ExperimentReport rep;
    try {
        cfg = build_config(e, o);
        rep = pmaf::run_experiment(cfg);
    } catch (const pmaf::InvalidConfigError& ex) {
        std::cerr << "pmaf: " << ex.what() << '\n';
        return kExitConfig;
    } catch (const pmaf::Error& ex) {
        std::cerr << "pmaf: " << ex.what() << '\n';
        return kExitConfig;
    }

    print_summary(rep);
    if (!cfg.output_path.empty() &&
        !write_file(cfg.output_path, [&](std::ostream& os) { pmaf::write_csv(rep, os); })) {
        return kExitConfig;
    }
    if (e == pmaf::Experiment::CaseStudy) {
        std::string trace_path = o.trace_out;
        if (trace_path.empty() && !cfg.output_path.empty()) {
            trace_path = cfg.output_path + ".trace.csv";
        }
        if (!trace_path.empty() &&
            !write_file(trace_path, [&](std::ostream& os) { pmaf::write_trace_csv(rep, os); })) {
            return kExitConfig;
        }
    }
    if (!o.json_out.empty() &&
        !write_file(o.json_out, [&](std::ostream& os) { os << config_json(cfg).dump(2) << '\n'; })) {
        return kExitConfig;
    }
    if (!rep.all_passed()) {
        for (const auto& r : rep.rows) {
            if (!r.passed) {
                std::cerr << "pmaf: check " << r.method << ' ' << r.m << 'x' << r.n
                          << " failed, seed " << r.failing_seed << '\n';
            }
        }
        return kExitCheckFailed;
    }
    return kExitOk;
}

void add_common(CLI::App* sub, CliOptions& o)
{
    sub->add_option("--sizes", o.sizes, "Comma-separated sizes, e.g. 2x2,64x32");
    sub->add_option("--samples", o.samples, "Instances per size");
    sub->add_option("--seed", o.seed, "Base seed");
    sub->add_option("--precision", o.precision, "f32 or f64");
    sub->add_option("--out", o.out, "CSV report path");
    sub->add_option("--json", o.json_out, "Write the full configuration as JSON");
    sub->add_option("--workers", o.workers, "Worker threads over instances");
    sub->add_flag("--rm", o.rm, "Tangent-space projection");
    sub->add_flag("--dw", o.dw, "Direction weight");
    sub->add_option("--bls", o.bls, "Backtracking: off, one or derived");
    sub->add_flag("--twd", o.twd, "Tangent weight decay");
    sub->add_option("--alpha", o.alpha, "Armijo constant");
    sub->add_option("--beta-bls", o.beta_bls, "Backtracking decay");
    sub->add_option("--beta-twd", o.beta_twd, "Tangent weight decay rate");
    sub->add_option("--tol", o.tol, "LESS convergence tolerance");
    sub->add_option("--max-iters", o.max_iters, "LESS iteration cap");
    sub->add_option("--ied-tol", o.ied_tol, "Eigen solver tolerance");
    sub->add_option("--ied-max-iters", o.ied_max_iters, "Eigen solver iteration cap");
    sub->add_option("--sign", o.sign, "Sign consistency: none, historical or hardcoded");
    sub->add_option("--dist", o.dist, "gaussian, uniform, vonmises or choice10");
    sub->add_flag("--nonsymmetric", o.nonsymmetric, "Skip the A + A^T symmetrisation");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"pmaf: differentiable sphere-constrained solvers, experiments and checks"};
    app.require_subcommand(1);
    CliOptions o;

    struct Entry
    {
        pmaf::Experiment e;
        const char* help;
        CLI::App* sub = nullptr;
    };
    std::vector<Entry> entries = {
        {pmaf::Experiment::LessCompare, "LESS solver comparison (In/Out/Imp/MRE)"},
        {pmaf::Experiment::IedPrecision, "Eigen solver precision sweep"},
        {pmaf::Experiment::BackwardBench, "Exploited vs materialized backward timing and memory"},
        {pmaf::Experiment::CaseStudy, "Per-iteration traces on one 2x2 instance"},
        {pmaf::Experiment::GradCheck, "Finite-difference gradient checks"},
    };
    for (auto& en : entries) {
        en.sub = app.add_subcommand(std::string(pmaf::to_string(en.e)), en.help);
        add_common(en.sub, o);
    }
    auto* bench = entries[2].sub;
    bench->add_flag("--no-less", o.no_less, "Skip the LESS rows");
    bench->add_flag("--no-ied", o.no_ied, "Skip the IED rows");
    auto* cs = entries[3].sub;
    cs->add_option("--instance", o.instance, "Row-major A then b for the single size given")
        ->delimiter(',');
    cs->add_option("--trace-out", o.trace_out, "Trace CSV path (default <out>.trace.csv)");
    entries[4].sub->add_flag("--corrupt-gradient", o.corrupt, "Negative control: perturb gradients");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex);
        return code == 0 ? kExitOk : kExitConfig;
    }
    for (const auto& en : entries) {
        if (en.sub->parsed()) {
            return run(en.e, o);
        }
    }
    return kExitConfig;
}
