// flowphys command-line entry point.

#include "flowphys/flowphys.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace flowphys;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    std::string out;
    std::vector<std::string> overrides;
};

PipelineConfig resolve_config(const Globals& g)
{
    PipelineConfig cfg = g.config_path.empty() ? PipelineConfig{} : load_config(g.config_path);
    for (const auto& o : g.overrides) {
        const auto eq = o.find('=');
        const auto dot = o.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
            throw ConfigError("--set expects section.key=value, got '" + o + "'");
        }
        set_config_value(cfg, o.substr(0, dot), std::string(csv::trim(o.substr(dot + 1, eq - dot - 1))),
                         csv::trim(o.substr(eq + 1)));
    }
    if (g.seed) cfg.model.seed = *g.seed;
    cfg.validate();
    return cfg;
}

std::vector<Label> parse_conditions(const std::string& s)
{
    if (s == "three") return pipeline::three_conditions();
    if (s == "four") return pipeline::four_conditions();
    std::vector<Label> out;
    for (auto part : csv::split(s)) out.push_back(parse_label(part));
    return out;
}

void emit(const std::string& out, const std::string& text)
{
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        pipeline::write_text(out, text);
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"flowphys: physiological flow-state analysis pipeline"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "pipeline config file ([clean] [window] [features] [stats] [model])")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "overrides model.seed");
    app.add_option("--jobs", g.jobs, "parallel sessions / folds")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "output file or directory");
    app.add_option("--set", g.overrides, "config override section.key=value (repeatable)");

    std::string session_dir;
    auto* clean = app.add_subcommand("clean", "write cleaned streams per segment");
    clean->add_option("session_dir", session_dir)->required();

    std::vector<std::string> session_dirs;
    auto* features = app.add_subcommand("features", "extract window features to features.csv");
    features->add_option("session_dirs", session_dirs, "session directories or cohort directories")->required();

    std::string features_csv;
    std::string measures, conditions = "three", path;
    std::optional<double> alpha;
    auto* stats_cmd = app.add_subcommand("stats", "condition statistics report");
    stats_cmd->add_option("features_csv", features_csv)->required();
    stats_cmd->add_option("--measures", measures, "comma-separated measures (default: config)");
    stats_cmd->add_option("--conditions", conditions, "three, four, or a comma-separated label list");
    stats_cmd->add_option("--path", path, "parametric or nonparametric (default: config)");
    stats_cmd->add_option("--alpha", alpha);

    std::string task = "nonflow_vs_flow", classifier;
    auto* eval = app.add_subcommand("eval", "leave-one-participant-out evaluation");
    eval->add_option("features_csv", features_csv)->required();
    eval->add_option("--task", task, "three_way, nonflow_vs_flow, balanced_vs_other_work, rest_vs_work");
    eval->add_option("--classifier", classifier, "linear_svm, decision_tree, random_forest (default: config)");

    std::string spec_path;
    std::size_t cohort = 0;
    double cohort_effect = 1.0, cohort_task_s = 600.0, cohort_rest_s = 180.0;
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic session (or cohort) directory");
    synth_cmd->add_option("spec_json", spec_path, "session spec JSON");
    synth_cmd->add_option("--cohort", cohort, "generate N participants instead of one spec");
    synth_cmd->add_option("--effect", cohort_effect, "cohort condition-effect multiplier");
    synth_cmd->add_option("--task-s", cohort_task_s, "cohort task duration in seconds");
    synth_cmd->add_option("--rest-s", cohort_rest_s, "cohort rest duration in seconds");

    std::string cohort_dir;
    auto* pipe = app.add_subcommand("pipeline", "features, stats and all four evaluations for a cohort");
    pipe->add_option("cohort_dir", cohort_dir)->required();

    CLI11_PARSE(app, argc, argv);

    std::string stage = "config";
    try {
        const auto cfg = resolve_config(g);

        if (*clean) {
            stage = "clean";
            if (g.out.empty()) throw ConfigError("clean requires --out <dir>");
            for (const auto& d : pipeline::cmd_clean(session_dir, cfg, g.out)) std::cerr << "wrote " << d.string() << '\n';
        } else if (*features) {
            stage = "features";
            std::vector<fs::path> dirs;
            for (const auto& d : session_dirs) {
                for (auto& p : pipeline::find_sessions(d)) dirs.push_back(p);
            }
            emit(g.out, to_csv(pipeline::cmd_features(dirs, cfg, g.jobs)));
        } else if (*stats_cmd) {
            stage = "stats";
            auto c = cfg;
            if (!measures.empty()) set_config_value(c, "stats", "measures", measures);
            if (!path.empty()) c.stats.path = stats::parse_path(path);
            if (alpha) c.stats.alpha = *alpha;
            c.validate();
            const auto rows = load_features_csv(features_csv);
            emit(g.out, pipeline::cmd_stats(rows, c.stats.measures, {parse_conditions(conditions)}, c).dump(2) + "\n");
        } else if (*eval) {
            stage = "eval";
            auto c = cfg;
            if (!classifier.empty()) c.model.classifier = parse_classifier(classifier);
            const auto rows = load_features_csv(features_csv);
            emit(g.out, pipeline::cmd_eval(rows, parse_task(task), c, g.jobs).dump(2) + "\n");
        } else if (*synth_cmd) {
            stage = "synth";
            if (g.out.empty()) throw ConfigError("synth requires --out <dir>");
            if (cohort > 0) {
                synth::CohortSessionOptions opt;
                opt.n_participants = cohort;
                opt.effect = cohort_effect;
                opt.task_s = cohort_task_s;
                opt.rest_s = cohort_rest_s;
                opt.seed = cfg.model.seed + 7;
                pipeline::cmd_synth_cohort(opt, g.out);
            } else {
                if (spec_path.empty()) throw ConfigError("synth needs a spec JSON or --cohort N");
                std::ifstream in(spec_path);
                if (!in) throw ValidationError("cannot open '" + spec_path + "'", "synth");
                nlohmann::json j;
                try {
                    in >> j;
                } catch (const nlohmann::json::exception& e) {
                    throw ValidationError(std::string("spec is not valid JSON: ") + e.what(), "synth");
                }
                pipeline::cmd_synth(synth::session_spec_from_json(j), g.out);
            }
        } else if (*pipe) {
            stage = "pipeline";
            if (g.out.empty()) throw ConfigError("pipeline requires --out <dir>");
            const auto res = pipeline::cmd_pipeline(cohort_dir, cfg, g.out, g.jobs);
            std::cerr << "wrote " << res.features_csv.string() << ", " << res.stats_report.string() << " and "
                      << res.eval_reports.size() << " eval reports\n";
        }
    } catch (const Error& e) {
        std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error [" << stage << "]: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
