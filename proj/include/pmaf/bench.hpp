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

#pragma once

// Experiment drivers behind the `pmaf` command line tool. Every driver is a
// plain function from a config to a report so tests can call it directly.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pmaf/eval.hpp"
#include "pmaf/ied_solver.hpp"
#include "pmaf/less_solver.hpp"
#include "pmaf/numkernel.hpp"

namespace pmaf
{

enum class Experiment
{
    LessCompare,
    IedPrecision,
    BackwardBench,
    CaseStudy,
    GradCheck
};

std::string_view to_string(Experiment e);
Experiment parse_experiment(std::string_view text);

using SizePair = std::pair<std::size_t, std::size_t>;

// "2x2,64x32" -> {(2,2), (64,32)}. Throws InvalidConfigError.
std::vector<SizePair> parse_sizes(std::string_view text);
std::string format_sizes(const std::vector<SizePair>& sizes);

inline constexpr std::size_t kDefaultByteBudget = std::size_t{2} << 30;

// Reads PMAF_BYTE_BUDGET (bytes) if set, else the 2 GiB default.
std::size_t byte_budget_from_env();

struct ExperimentConfig
{
    Experiment experiment = Experiment::LessCompare;
    std::vector<SizePair> sizes;
    std::size_t n_samples = 1;
    std::uint64_t seed = 7;
    Precision precision = Precision::F64;
    std::size_t workers = 1;
    std::string output_path;

    // LESS: tolerances and step-control constants shared by all method rows.
    LessConfig less;

    // IED forward solvers.
    double ied_tol = kIedDefaultTol;
    std::size_t ied_max_iters = kIedDefaultMaxIters;
    SignMode sign_mode = SignMode::HardCoded;
    Distribution dist = Distribution::Gaussian01;
    bool symmetric = true;

    // Backward bench: which layers to time. IED rows need square sizes.
    bool bench_less = true;
    bool bench_ied = true;
    std::size_t byte_budget = kDefaultByteBudget;

    // Case study: optional user instance (row-major A, then b).
    std::optional<LessProblem<double>> case_instance;

    // Grad check: negative control that perturbs every analytic gradient.
    bool corrupt_gradient = false;

    // Throws InvalidConfigError.
    void validate() const;
};

struct ReportRow
{
    std::string method;
    std::size_t m = 0;
    std::size_t n = 0;
    std::size_t samples = 0;
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t imp = 0;
    double mre = 0.0;
    double mean_fpd = 0.0;
    double mean_eig_dist = 0.0;
    double max_eig_dist = 0.0;
    double forward_s = 0.0;
    double backward_s = 0.0;
    std::size_t peak_bytes = 0;
    double max_rel_err = 0.0;    // grad check, J vs E, or eigenvalue error vs reference
    double threshold = 0.0;      // grad check tolerance
    double ref_gap = 0.0;        // case study: final FPD minus the grid optimum (NaN if n != 2)
    std::size_t skipped = 0;     // oracle unavailable / numeric failure
    std::size_t floored = 0;     // MRE references clamped at the floor
    std::size_t iterations = 0;  // case study
    bool converged = false;      // case study
    bool available = true;       // false when refused by the byte budget
    bool passed = true;          // grad check verdict
    std::uint64_t failing_seed = 0;
};

struct TracePoint
{
    std::string method;
    std::size_t iter = 0;
    Vector u;
    double objective = 0.0;
    double eta = 0.0;
};

struct ExperimentReport
{
    Experiment experiment = Experiment::LessCompare;
    Precision precision = Precision::F64;
    std::vector<ReportRow> rows;
    std::vector<TracePoint> trace;  // case study only
    std::vector<std::string> notes;

    bool all_passed() const;
};

ExperimentReport run_less_compare(const ExperimentConfig& cfg);
ExperimentReport run_ied_precision(const ExperimentConfig& cfg);
ExperimentReport run_backward_bench(const ExperimentConfig& cfg);
ExperimentReport run_case_study(const ExperimentConfig& cfg);
ExperimentReport run_grad_check(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// The six method variants shown in the case study.
std::vector<LessConfig> case_study_configs();

// The 2x2 case-study instance.
LessProblem<double> case_study_instance();

// Every experiment shares one header so downstream tooling reads all reports
// alike; fields an experiment does not produce stay at their defaults.
// Doubles are written in shortest round-trip form, NaN as an empty field.
const std::vector<std::string>& csv_header();
void write_csv(const ExperimentReport& report, std::ostream& os);

// method,iter,objective,eta,u_0..u_{n-1}
void write_trace_csv(const ExperimentReport& report, std::ostream& os);

std::string format_double(double v);

// Runs fn(i) for i in [0, count) on `workers` threads. Results must be
// written to per-index slots by the caller.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace pmaf
