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

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "pmaf/bench.hpp"
#include "pmaf/error.hpp"

using namespace pmaf;

namespace
{
std::vector<std::string> split(const std::string& line, char sep = ',')
{
    std::vector<std::string> out;
    std::string cur;
    for (const char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);) {
        out.push_back(l);
    }
    return out;
}

ExperimentConfig config(Experiment e, const std::string& sizes, std::size_t samples)
{
    ExperimentConfig c;
    c.experiment = e;
    c.sizes = parse_sizes(sizes);
    c.n_samples = samples;
    return c;
}

// Every numeric column except the timings.
std::string numeric_fingerprint(const ExperimentReport& r)
{
    std::ostringstream os;
    for (const auto& row : r.rows) {
        os << row.method << row.in << row.out << row.imp << format_double(row.mre)
           << format_double(row.mean_fpd) << format_double(row.mean_eig_dist)
           << format_double(row.max_rel_err) << row.peak_bytes << row.iterations << '\n';
    }
    return os.str();
}
}  // namespace

TEST_CASE("size lists")
{
    const auto s = parse_sizes("2x2,64x32");
    REQUIRE(s.size() == 2);
    CHECK(s[1] == SizePair{64, 32});
    CHECK(format_sizes(s) == "2x2,64x32");
    CHECK_THROWS_AS(parse_sizes("2by2"), InvalidConfigError);
    CHECK_THROWS_AS(parse_sizes("0x2"), InvalidConfigError);
    CHECK_THROWS_AS(parse_sizes("2x"), InvalidConfigError);
    CHECK_THROWS_AS(parse_sizes(""), InvalidConfigError);
    CHECK(parse_experiment("grad-check") == Experiment::GradCheck);
    CHECK_THROWS_AS(parse_experiment("nope"), InvalidConfigError);
}

TEST_CASE("config validation")
{
    auto c = config(Experiment::LessCompare, "2x2", 1);
    CHECK_NOTHROW(c.validate());
    c.n_samples = 0;
    CHECK_THROWS_AS(c.validate(), InvalidConfigError);
    c = config(Experiment::IedPrecision, "4x3", 1);
    CHECK_THROWS_AS(c.validate(), InvalidConfigError);
    c.sizes.clear();
    CHECK_THROWS_AS(c.validate(), InvalidConfigError);
}

TEST_CASE("less-compare with one sample has one row per method")
{
    const auto r = run_less_compare(config(Experiment::LessCompare, "2x2", 1));
    REQUIRE(r.rows.size() == 10);
    CHECK(r.rows.back().method == "Reference");
    for (const auto& row : r.rows) {
        CHECK(row.in + row.out <= 1);
        CHECK(row.samples == 1);
    }
    std::ostringstream os;
    write_csv(r, os);
    const auto ls = lines(os.str());
    REQUIRE(ls.size() == 11);
    CHECK(split(ls[0]).size() == csv_header().size());
    for (std::size_t i = 1; i < ls.size(); ++i) {
        CHECK(split(ls[i]).size() == csv_header().size());
    }
}

TEST_CASE("less-compare invariants on a small batch")
{
    auto cfg = config(Experiment::LessCompare, "2x2,5x3", 40);
    const auto a = run_less_compare(cfg);
    for (const auto& row : a.rows) {
        CHECK(row.in + row.out <= row.samples);
        CHECK(row.imp <= row.samples);
    }
    cfg.workers = 3;
    const auto b = run_less_compare(cfg);
    CHECK(numeric_fingerprint(a) == numeric_fingerprint(b));
}

TEST_CASE("csv header is fixed and the number format is locale free")
{
    const auto& h = csv_header();
    CHECK(h.front() == "experiment");
    CHECK(h[1] == "method");
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(-1.5e-300) == "-1.5e-300");
    CHECK(format_double(std::nan("")).empty());
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(format_double(1234567.0).find(',') == std::string::npos);
}

TEST_CASE("ied-precision rows and accuracy")
{
    auto cfg = config(Experiment::IedPrecision, "64x64", 5);
    cfg.ied_tol = 1e-10;
    cfg.ied_max_iters = 2000;
    const auto r = run_ied_precision(cfg);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].method == "PI");
    CHECK(r.rows[0].max_eig_dist <= 1e-6);
    CHECK(r.rows[0].max_rel_err <= 1e-8);
    CHECK(r.rows[2].max_eig_dist <= 1e-6);
    CHECK(r.rows[0].skipped == 0);
}

TEST_CASE("ied-precision on 1x1 problems")
{
    const auto r = run_ied_precision(config(Experiment::IedPrecision, "1x1", 2));
    for (const auto& row : r.rows) {
        CHECK(row.max_eig_dist == doctest::Approx(0).epsilon(1e-15));
        CHECK(row.mean_fpd == doctest::Approx(0).epsilon(1e-15));
    }
}

TEST_CASE("ied-precision in float")
{
    auto cfg = config(Experiment::IedPrecision, "32x32", 3);
    cfg.precision = Precision::F32;
    const auto r = run_ied_precision(cfg);
    for (const auto& row : r.rows) {
        CHECK(row.max_eig_dist <= 1e-2);
    }
}

TEST_CASE("ied-precision counts unavailable references as skipped")
{
    auto cfg = config(Experiment::IedPrecision, "3x3", 4);
    cfg.symmetric = false;
    cfg.dist = Distribution::Gaussian01;
    const auto r = run_ied_precision(cfg);
    for (const auto& row : r.rows) {
        CHECK(row.skipped <= 4);
    }
}

TEST_CASE("backward bench rows, budget refusal and determinism")
{
    auto cfg = config(Experiment::BackwardBench, "6x6,3x5", 3);
    const auto a = run_backward_bench(cfg);
    // LESS E/J for both sizes, IED rows for the square one only.
    REQUIRE(a.rows.size() == 2 + 4 + 2);
    for (const auto& row : a.rows) {
        CHECK(row.available);
        if (row.method.back() == 'J') {
            CHECK(row.max_rel_err <= 1e-6);
        }
    }
    const auto b = run_backward_bench(cfg);
    CHECK(numeric_fingerprint(a) == numeric_fingerprint(b));

    cfg.byte_budget = 64;
    const auto c = run_backward_bench(cfg);
    for (const auto& row : c.rows) {
        CHECK(row.available == (row.method.back() == 'E'));
    }
    CHECK_FALSE(c.notes.empty());
}

TEST_CASE("byte budget from the environment")
{
    CHECK(byte_budget_from_env() > 0);
}

TEST_CASE("case study: refined methods beat vanilla PGD on the default instance")
{
    auto cfg = config(Experiment::CaseStudy, "2x2", 1);
    const auto r = run_case_study(cfg);
    REQUIRE(r.rows.size() == 7);
    const auto find = [&](const std::string& m) {
        for (const auto& row : r.rows) {
            if (row.method == m) {
                return row;
            }
        }
        FAIL("missing row " << m);
        return ReportRow{};
    };
    const auto pgd = find("PGD");
    for (const std::string m : {"PGD+RM+BLSOne", "PGD+RM+TWD"}) {
        const auto row = find(m);
        CHECK(row.iterations < pgd.iterations);
        CHECK(std::abs(row.ref_gap) <= 1e-6);
    }
}

TEST_CASE("case study: an optimal start gives short traces")
{
    auto cfg = config(Experiment::CaseStudy, "2x2", 1);
    cfg.case_instance = LessProblem<double>(Matrix::identity(2), Vector{2, 0});
    const auto r = run_case_study(cfg);
    for (const auto& row : r.rows) {
        if (row.method != "Reference") {
            CHECK(row.iterations + 1 <= 3);
        }
    }
}

TEST_CASE("case study: trace csv round-trips the objective")
{
    const auto p = case_study_instance();
    const auto r = run_case_study(config(Experiment::CaseStudy, "2x2", 1));
    std::ostringstream os;
    write_trace_csv(r, os);
    const auto ls = lines(os.str());
    REQUIRE(ls.size() == r.trace.size() + 1);
    CHECK(ls[0] == "method,iter,objective,eta,u_0,u_1");
    for (std::size_t i = 1; i < ls.size(); ++i) {
        const auto f = split(ls[i]);
        REQUIRE(f.size() == 6);
        const Vector u{std::stod(f[4]), std::stod(f[5])};
        CHECK(std::abs(less_objective(p, u) - std::stod(f[2])) <= 1e-12);
    }
}

TEST_CASE("case study: larger user instances drop the grid column")
{
    auto cfg = config(Experiment::CaseStudy, "3x3", 1);
    cfg.case_instance = LessProblem<double>(Matrix::identity(3), Vector{1, 2, 3});
    const auto r = run_case_study(cfg);
    CHECK(std::isnan(r.rows.front().ref_gap));
    CHECK_FALSE(r.notes.empty());
}

TEST_CASE("grad check passes and its negative control fails")
{
    auto cfg = config(Experiment::GradCheck, "4x3,4x4", 3);
    const auto ok = run_grad_check(cfg);
    CHECK(ok.all_passed());
    for (const auto& row : ok.rows) {
        CHECK(row.threshold == 1e-4);
    }
    cfg.corrupt_gradient = true;
    const auto bad = run_grad_check(cfg);
    CHECK_FALSE(bad.all_passed());
    for (const auto& row : bad.rows) {
        if (!row.passed) {
            CHECK(row.failing_seed == derive_seed(cfg.seed, 0));
        }
    }
}

TEST_CASE("grad check in float uses the relaxed threshold")
{
    auto cfg = config(Experiment::GradCheck, "4x3,4x4", 2);
    cfg.precision = Precision::F32;
    const auto r = run_grad_check(cfg);
    CHECK(r.all_passed());
    for (const auto& row : r.rows) {
        CHECK(row.threshold == 1e-2);
    }
}

TEST_CASE("parallel_for covers every index once and forwards errors")
{
    std::vector<int> hits(50, 0);
    parallel_for(50, 4, [&](std::size_t i) { hits[i] += 1; });
    for (const int h : hits) {
        CHECK(h == 1);
    }
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](std::size_t i) {
                                     if (i == 7) {
                                         throw DomainError("boom");
                                     }
                                 }),
                    DomainError);
}
