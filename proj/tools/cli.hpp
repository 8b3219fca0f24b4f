/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#ifndef STREAMOD_TOOLS_CLI_HPP_
#define STREAMOD_TOOLS_CLI_HPP_

#include <streamod/streamod.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace streamod::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitMismatch = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitFailure = 3;

struct Options {
    std::string algorithm = "advanced";
    std::string partitioning;
    std::size_t window = 10000;
    std::string slide = "10%";
    double radius = 0.28;
    std::size_t k = 50;
    std::size_t dims = 1;
    std::string columns;
    bool normalize = false;
    std::size_t partitions = 1;
    std::size_t workers = 0;
    std::string backend = "none";
    std::string queue = "none";
    std::string slicing = "off";
    std::string dataset;
    bool gaussian = false;
    std::uint64_t seed = 42;
    std::size_t slides = 200;
    bool verify = false;
    std::string out = "streamod-out";
    bool header = false;
    std::string delimiter = ",";
    std::optional<std::size_t> time_column;
    std::size_t sample_size = 10000;
    std::string sample_file;
    std::string metric = "euclidean";
    std::size_t mtree_capacity = MTree<>::kDefaultCapacity;
    bool check_invariants = false;
};

/// "500" is a count; "5%" is a fraction of W that must come out whole.
inline std::size_t parse_slide(const std::string& text, std::size_t window) {
    if (text.empty()) throw UsageError("--S must not be empty");
    try {
        std::size_t used = 0;
        if (text.back() == '%') {
            const double pct = std::stod(text.substr(0, text.size() - 1), &used);
            if (used != text.size() - 1 || !(pct > 0.0) || pct > 100.0) throw UsageError("");
            const double exact = static_cast<double>(window) * pct / 100.0;
            const auto count = static_cast<std::size_t>(std::llround(exact));
            if (count == 0 || std::fabs(exact - static_cast<double>(count)) > 1e-9 * static_cast<double>(window)) {
                throw UsageError("--S " + text + " of W=" + std::to_string(window) + " is not a whole number of objects");
            }
            return count;
        }
        const long long v = std::stoll(text, &used);
        if (used != text.size() || v <= 0) throw UsageError("");
        return static_cast<std::size_t>(v);
    } catch (const UsageError& e) {
        if (std::string(e.what()).empty()) throw UsageError("--S expects a positive count or a percentage such as 5%");
        throw;
    } catch (const std::exception&) {
        throw UsageError("--S expects a positive count or a percentage such as 5%");
    }
}

inline std::vector<std::size_t> parse_columns(const std::string& text) {
    std::vector<std::size_t> cols;
    if (text.empty()) return cols;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(item, &used);
            if (used != item.size() || v < 0) throw std::invalid_argument(item);
            cols.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw UsageError("--columns expects comma-separated 0-based indexes, got '" + text + "'");
        }
    }
    return cols;
}

struct Plan {
    TopologyConfig topology;
    StreamSource source;
    std::vector<Point> sample;
    std::size_t window_count = 0;
    std::size_t slide_count = 0;
    std::vector<std::pair<std::string, std::string>> echo;
};

inline std::string format_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline Plan make_plan(const Options& o) {
    Plan plan;
    TopologyConfig& topo = plan.topology;
    const bool sliced = o.slicing == "on";
    if (o.slicing != "on" && o.slicing != "off") throw UsageError("--slicing expects on or off");
    topo.algorithm = parse_algorithm(o.algorithm);
    if (sliced) {
        if (topo.algorithm != Algorithm::advanced && topo.algorithm != Algorithm::advanced_sliced) {
            throw UsageError("--slicing on applies to the advanced algorithm only");
        }
        topo.algorithm = Algorithm::advanced_sliced;
    }
    if (o.partitioning.empty()) {
        topo.partitioning = topo.algorithm == Algorithm::naive || topo.algorithm == Algorithm::baseline
                                ? Partitioning::random
                                : Partitioning::grid;
    } else {
        topo.partitioning = parse_partitioning(o.partitioning);
    }
    if (!o.dataset.empty() && o.gaussian) throw UsageError("--dataset and --gaussian are mutually exclusive");

    plan.window_count = o.window;
    plan.slide_count = parse_slide(o.slide, o.window);
    if (o.window == 0 || plan.slide_count > o.window || o.window % plan.slide_count != 0) {
        throw UsageError("S must divide W (got W=" + std::to_string(o.window) + ", S="
                         + std::to_string(plan.slide_count) + ")");
    }
    const Metric metric = parse_metric(o.metric);
    const std::size_t total = o.slides * plan.slide_count;

    std::size_t dims = o.dims;
    if (!o.dataset.empty()) {
        if (o.delimiter.size() != 1) throw UsageError("--delimiter expects one character");
        DatasetSpec spec;
        spec.path = o.dataset;
        spec.delimiter = o.delimiter[0];
        spec.columns = parse_columns(o.columns);
        spec.header = o.header;
        spec.normalize = o.normalize;
        spec.time_column = o.time_column;
        CsvData data = read_csv_file(spec);
        if (data.values.empty()) throw UsageError("dataset '" + o.dataset + "' has no rows");
        dims = data.values.front().size();
        if (o.time_column) {
            plan.source.mode = ArrivalMode::native;
            for (std::size_t i = 0; i < data.values.size(); ++i) {
                StreamObject obj;
                obj.id = i;
                obj.value = data.values[i];
                obj.t = data.times[i];
                plan.source.objects.push_back(std::move(obj));
            }
            plan.source.validate();
        } else {
            if (data.values.size() > total) data.values.resize(total);
            plan.source = make_count_source(data.values, plan.window_count, plan.slide_count);
        }
    } else {
        if (!o.columns.empty()) throw UsageError("--columns applies to --dataset input only");
        auto spec = default_gaussian_spec(dims, o.seed);
        auto values = generate_gaussian_values(spec, total);
        if (o.normalize) {
            for (std::size_t j = 0; j < dims; ++j) {
                double lo = 1e300;
                double hi = -1e300;
                for (const auto& p : values) {
                    lo = std::min(lo, p[j]);
                    hi = std::max(hi, p[j]);
                }
                for (auto& p : values) p[j] = hi > lo ? (p[j] - lo) / (hi - lo) : 0.0;
            }
        }
        plan.source = make_count_source(values, plan.window_count, plan.slide_count);
    }

    if (plan.source.mode == ArrivalMode::native) {
        topo.window = WindowConfig{static_cast<Tick>(plan.window_count), static_cast<Tick>(plan.slide_count), o.radius,
                                   o.k, dims, o.partitions, metric};
    } else {
        topo.window = count_window(plan.window_count, plan.slide_count, o.radius, o.k, dims, o.partitions, metric);
    }
    topo.pmcod.backend = parse_neighbor_backend(o.backend);
    topo.pmcod.queue = parse_queue_flavor(o.queue);
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    topo.workers = o.workers > 0 ? o.workers : std::min(o.partitions, static_cast<std::size_t>(hw));
    topo.sample_size = o.sample_size;
    topo.mtree_capacity = o.mtree_capacity;
    topo.validate();

    if (!o.sample_file.empty()) {
        DatasetSpec spec;
        spec.path = o.sample_file;
        spec.delimiter = o.delimiter.empty() ? ',' : o.delimiter[0];
        spec.columns = parse_columns(o.columns);
        spec.header = o.header;
        plan.sample = read_csv_values(spec);
    }

    plan.echo = {{"algorithm", to_string(topo.algorithm)},
                 {"partitioning", to_string(topo.partitioning)},
                 {"W", std::to_string(plan.window_count)},
                 {"S", std::to_string(plan.slide_count)},
                 {"R", format_g(o.radius)},
                 {"k", std::to_string(o.k)},
                 {"dims", std::to_string(dims)},
                 {"metric", to_string(metric)},
                 {"partitions", std::to_string(o.partitions)},
                 {"workers", std::to_string(topo.workers)},
                 {"flavor_backend", to_string(topo.pmcod.backend)},
                 {"flavor_queue", to_string(topo.pmcod.queue)},
                 {"slicing", o.slicing},
                 {"dataset", o.dataset.empty() ? "gaussian" : o.dataset},
                 {"columns", o.columns},
                 {"normalize", o.normalize ? "1" : "0"},
                 {"seed", std::to_string(o.seed)},
                 {"slides", std::to_string(o.slides)},
                 {"verify", o.verify ? "1" : "0"}};
    return plan;
}

inline void add_flags(CLI::App& app, Options& o) {
    app.add_option("--algorithm", o.algorithm, "baseline, naive, advanced, advanced-sliced or pmcod")
        ->capture_default_str();
    app.add_option("--partitioning", o.partitioning, "random, grid or vptree (default: random for naive, grid otherwise)");
    app.add_option("--W", o.window, "window size in objects")->capture_default_str();
    app.add_option("--S", o.slide, "slide size: object count or percent of W, e.g. 5%")->capture_default_str();
    app.add_option("--R", o.radius, "neighbor distance threshold")->capture_default_str();
    app.add_option("--k", o.k, "neighbor count threshold")->capture_default_str();
    app.add_option("--dims", o.dims, "dimensions of the Gaussian stream")->capture_default_str();
    app.add_option("--columns", o.columns, "0-based dataset columns, comma separated");
    app.add_flag("--normalize", o.normalize, "min-max normalize every dimension");
    app.add_option("--partitions", o.partitions, "number of partitions")->capture_default_str();
    app.add_option("--workers", o.workers, "worker threads (default: min(partitions, cores))");
    app.add_option("--flavor-backend", o.backend, "pmcod neighbor search: full-mtree, none, po-mtree, dual-mtree")
        ->capture_default_str();
    app.add_option("--flavor-queue", o.queue, "pmcod event queue: none, heap, ordered")->capture_default_str();
    app.add_option("--slicing", o.slicing, "time-slicing for the advanced algorithm: on or off")->capture_default_str();
    app.add_option("--dataset", o.dataset, "CSV input file");
    app.add_flag("--gaussian", o.gaussian, "use the bundled three-component Gaussian mixture (default input)");
    app.add_option("--seed", o.seed, "generator seed")->capture_default_str();
    app.add_option("--slides", o.slides, "number of slides to run")->capture_default_str();
    app.add_flag("--verify", o.verify, "compare every slide against the brute-force oracle");
    app.add_option("--out", o.out, "output directory for summary.csv and slides.csv")->capture_default_str();
    app.add_flag("--header", o.header, "dataset has a header row");
    app.add_option("--delimiter", o.delimiter, "dataset field delimiter")->capture_default_str();
    app.add_option("--time-column", o.time_column, "0-based integer timestamp column; W and S are then in ticks");
    app.add_option("--sample-size", o.sample_size, "stream prefix used to build value-based partitioners")
        ->capture_default_str();
    app.add_option("--sample-file", o.sample_file, "CSV file used to build value-based partitioners");
    app.add_option("--metric", o.metric, "euclidean, manhattan or chebyshev")->capture_default_str();
    app.add_option("--mtree-capacity", o.mtree_capacity, "M-tree node capacity")->capture_default_str();
    app.add_flag("--check-invariants", o.check_invariants, "check processor invariants after every slide");
}

inline int run(const Options& o, std::ostream& out, std::ostream& err) {
    Plan plan = make_plan(o);
    RunOptions ropts;
    ropts.max_slides = o.slides;
    ropts.check_invariants = o.check_invariants;
    ropts.sample = plan.sample;
    const RunResult result = run_topology(plan.source, plan.topology, ropts);

    const RunRecord record = make_run_record(plan.echo, result);
    write_run_record(o.out, record);

    const RunMetrics& m = result.metrics;
    char line[512];
    std::snprintf(line, sizeof line,
                  "%s/%s: slides=%zu mean_slide_ms=%.3f median_slide_ms=%.3f throughput=%.0f obj/s "
                  "replication=%.3f outliers=%.3f%%",
                  to_string(plan.topology.algorithm), to_string(plan.topology.partitioning), m.slides,
                  m.mean_slide_ms, m.median_slide_ms, m.throughput, m.replication, 100.0 * m.outlier_fraction);
    out << line << "\n";

    if (!o.verify) return kExitOk;
    const OracleTrace trace = oracle_trace(plan.source, plan.topology.window, o.slides);
    std::vector<std::vector<ObjectId>> expected;
    std::vector<std::vector<ObjectId>> actual;
    for (std::size_t s = 0; s < trace.slides(); ++s) expected.push_back(trace.outliers(s, plan.topology.window.k));
    for (const auto& r : result.reports) actual.push_back(r.outliers);
    const auto mismatches = compare_outliers(expected, actual);
    if (mismatches.empty()) {
        out << "verify: OK (" << expected.size() << " slides match the brute-force oracle)\n";
        return kExitOk;
    }
    for (const auto& mm : mismatches) {
        err << "verify: slide " << mm.slide << " mismatch, " << mm.missing.size() << " missing, "
            << mm.spurious.size() << " spurious\n";
    }
    err << "verify: FAILED on " << mismatches.size() << " of " << expected.size() << " slides\n";
    return kExitMismatch;
}

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Parallel streaming distance-based outlier detection"};
    Options o;
    add_flags(app, o);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        return run(o, out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace streamod::cli

#endif  // STREAMOD_TOOLS_CLI_HPP_
