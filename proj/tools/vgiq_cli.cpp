// vgiq: synthesize station data, learn per-station qualities, map and
// cross-validate quality-weighted Gaussian process predictions.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vgiq/vgiq.hpp"

namespace fs = std::filesystem;
using namespace vgiq;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::vector<std::string> settings;
    std::optional<std::string> qualities;
    std::optional<std::string> model;
};

RunConfig build_config(const GlobalOptions& g) {
    RunConfig c;
    if (!g.config.empty()) load_config(g.config, c);
    for (const auto& s : g.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        apply_setting(c, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
    }
    if (g.seed) c.seed = *g.seed;
    if (g.out) c.out = *g.out;
    if (g.qualities) c.qualities = *g.qualities;
    if (g.model) c.predict_model = parse_model_kind(*g.model);
    c.validate();
    return c;
}

Dataset load_all(const RunConfig& c) { return load_dataset(c.stations_path(), c.observations_path()); }

CombinedKernelParams resolve_kernel(const RunConfig& c, const Dataset& all) {
    const auto ref = all.filter_source(Source::Reference).filter_slices(c.train_slices);
    return c.kernel.resolve(ref.quality_observations());
}

int cmd_synth(const RunConfig& c) {
    const auto sc = generate_scenario(c.synth_config());
    std::vector<SensorStation> stations = sc.reference.stations();
    stations.insert(stations.end(), sc.volunteered.stations().begin(), sc.volunteered.stations().end());
    std::vector<Observation> obs = sc.reference.observations();
    obs.insert(obs.end(), sc.volunteered.observations().begin(), sc.volunteered.observations().end());
    save_stations(c.out / "stations.csv", stations);
    save_observations(c.out / "observations.csv", obs);
    save_truth(c.out / "truth.csv", sc.truth_rows());
    std::cout << "wrote " << stations.size() << " stations, " << obs.size() << " observations ("
              << sc.corrupted_ids.size() << " corrupted stations) to " << c.out.string() << "\n";
    return kOk;
}

int cmd_train(const RunConfig& c) {
    const Dataset all = load_all(c);
    const auto ref = all.filter_source(Source::Reference).filter_slices(c.train_slices);
    const auto vgi = all.filter_source(Source::Volunteered).filter_slices(c.train_slices);
    EvolveConfig e = c.evolve;
    e.kernel = resolve_kernel(c, all);
    e.seed = c.seed;
    const auto res = run(ref, vgi, e);
    save_qualities(c.out / "qualities.csv", res.final_qualities);
    atomic_write(c.out / "evolve_log.csv", [&](std::ostream& os) { write_iteration_log(os, res.log); });
    std::cout << "iterations " << res.iterations_run << " ("
              << (res.termination == Termination::Converged ? "converged" : "max_iter reached")
              << "), fitness on first partition " << res.initial_fitness << ", on last partition "
              << (res.fitness_trace.empty() ? res.initial_fitness : res.fitness_trace.back()) << "\n";
    return kOk;
}

int cmd_predict(const RunConfig& c) {
    const Dataset all = load_all(c);
    const Slice slice = c.predict_slice.value_or(*c.eval_slices.begin());
    const auto kernel = resolve_kernel(c, all);

    const Dataset ref = all.filter_source(Source::Reference);
    const Dataset vgi = all.filter_source(Source::Volunteered);
    ModelSpec spec = c.model_specs().front();
    spec.kind = c.predict_model;
    Dataset data = model_training_data(spec, ref, vgi);
    if (spec.kind == ModelKind::Learned) {
        const QualityMap q = load_qualities(c.qualities_path());
        std::set<std::string> missing;
        for (const auto& o : all.observations()) {
            if (!q.contains(o.station_id)) missing.insert(o.station_id);
        }
        if (!missing.empty()) {
            std::string list;
            for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
            throw ReferentialError("qualities file lacks entries for stations: " + list);
        }
        QualityMap known;
        for (const auto& [id, v] : q) {
            if (data.find(id) != nullptr) known.emplace(id, v);
        }
        data = data.with_qualities(known);
    }
    const auto train = data.quality_observations(slice);
    if (train.empty()) throw EmptyDataset("no observations in slice " + std::to_string(slice));
    const GprModel model = fit(train, kernel);
    const auto grid = predict_grid(model, c.bbox, c.resolution);
    save_grid(c.out / "grid.csv", grid);
    atomic_write(c.out / "heatmap.ppm",
                 [&](std::ostream& os) { write_heatmap_ppm(os, grid, grid_shape(c.bbox, c.resolution)); });
    std::cout << "wrote " << grid.size() << " grid cells for model " << to_string(spec.kind) << ", slice " << slice
              << "\n";
    return kOk;
}

int cmd_evaluate(const RunConfig& c) {
    const Dataset all = load_all(c);
    const auto ref = all.filter_source(Source::Reference);
    const auto vgi = all.filter_source(Source::Volunteered);
    const auto specs = c.model_specs();
    const auto report = run_evaluation(ref, vgi, specs, c.k, c.seed, c.eval_options());
    atomic_write(c.out / "report.csv", [&](std::ostream& os) { write_report_csv(os, report); });
    atomic_write(c.out / "aggregate.csv", [&](std::ostream& os) { write_aggregate_csv(os, report); });
    atomic_write(c.out / "histogram.csv", [&](std::ostream& os) { write_histogram_csv(os, report); });
    atomic_write(c.out / "histogram.ppm", [&](std::ostream& os) { write_histogram_ppm(os, report); });
    std::printf("%-10s %10s %10s\n", "model", "mae_c", "sd_abs_c");
    for (const auto& m : report.models) std::printf("%-10s %10.4f %10.4f\n", to_string(m.spec.kind), m.mae, m.sd_abs);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Per-station quality learning and quality-weighted GP temperature mapping"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--config", g.config, "key = value config file");
    app.add_option("--seed", g.seed, "RNG seed (overrides config)");
    app.add_option("--out", g.out, "output directory (overrides config)");
    app.add_option("--set", g.settings, "override a config key, key=value (repeatable)");

    auto* synth = app.add_subcommand("synth", "write a synthetic scenario (stations, observations, truth)");
    auto* train = app.add_subcommand("train", "learn station qualities; writes qualities.csv, evolve_log.csv");
    auto* predict = app.add_subcommand("predict", "predict a grid; writes grid.csv, heatmap.ppm");
    predict->add_option("--qualities", g.qualities, "qualities.csv for the learned model");
    predict->add_option("--model", g.model, "baseline | naive | apriori | learned");
    auto* evaluate = app.add_subcommand("evaluate", "k-fold cross-validation of all models");
    for (auto* sub : {synth, train, predict, evaluate}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        const RunConfig c = build_config(g);
        if (synth->parsed()) return cmd_synth(c);
        if (train->parsed()) return cmd_train(c);
        if (predict->parsed()) return cmd_predict(c);
        if (evaluate->parsed()) return cmd_evaluate(c);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const CholeskyFailure& e) {
        std::cerr << "numerical failure: " << e.what() << " (diagonal range " << e.min_diagonal() << " .. "
                  << e.max_diagonal() << ")\n";
        return kNumeric;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}
