// drd: command-line front end of the experiment harness.
//
//   drd train    --config cfg.json [--seed N] [--force]
//   drd ablate   --suite components|depth|projector|boundary|pairing --seeds 0,1,2,3 [--config cfg.json]
//   drd diagnose --run <id>
//   drd report   --runs <id,id,...|all> --format csv|jsonl|plotdata [--out dir]
//   drd overhead --config cfg.json [--iterations 100]
//
// Results live under $REPROG_RESULTS_DIR (default ./results).

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "drd/allocator.hpp"
#include "drd/error.hpp"
#include "drd/harness.hpp"

namespace {

using namespace drd;

void log_line(const std::string& s) { std::cerr << s << '\n'; }

RunConfig config_or_reference(const std::string& path) {
    return path.empty() ? reference_config(TaskKind::classification) : load_run_config(path);
}

void print_result(const RunResult& r) {
    std::printf("run %s%s\n", r.run_id.c_str(), r.cached ? " (cached)" : "");
    std::printf("method %s, seed %llu, epochs %zu\n", std::string(to_string(r.config.method)).c_str(),
                static_cast<unsigned long long>(r.config.seed), r.config.epochs);
    std::printf("metric initial %.1f final %.1f best %.1f\n", r.initial_metric, r.final_metric, r.best_metric);
    std::printf("convergence: decrease fraction %.2f, diverged %s\n", r.convergence.decrease_fraction,
                r.convergence.diverged ? "yes" : "no");
    for (const auto& d : r.diagnoses) {
        const auto& g = d.diagnosis;
        auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("n/a"); };
        std::printf("diagnosis @%.0f%% (epoch %zu): cos(hybrid,sup) %s cos(kd,sup) %s |cka|/|sup| %.4f%%\n",
                    d.fraction * 100.0, d.epoch, show(g.cos_hybrid_vs_sup).c_str(), show(g.cos_kd_vs_sup).c_str(),
                    g.cka_to_sup_norm_ratio * 100.0);
    }
    if (r.similarity) {
        std::printf("stage similarity (teacher rows x student cols):\n");
        for (std::size_t i = 0; i < r.similarity->rows; ++i) {
            for (std::size_t j = 0; j < r.similarity->cols; ++j) {
                std::printf(" %7.3f", r.similarity->at(i, j));
            }
            std::printf("\n");
        }
    }
    std::printf("%zu steps, %.1f s, %.2f ms/step\n", r.steps, r.seconds, r.ms_per_step);
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = s.find(',', pos);
        const auto end = comma == std::string::npos ? s.size() : comma;
        if (end > pos) {
            out.push_back(s.substr(pos, end - pos));
        }
        pos = end + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    drd::tune_allocator();
    CLI::App app{"Deep reprogramming distillation laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool force = false;
    auto* train_cmd = app.add_subcommand("train", "Run one configuration");
    train_cmd->add_option("--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--seed", seed, "Override the run seed");
    train_cmd->add_flag("--force", force, "Recompute even if cached");

    std::string suite;
    std::string seeds_text = "0,1,2,3";
    std::string ablate_config;
    auto* ablate_cmd = app.add_subcommand("ablate", "Run an ablation suite");
    ablate_cmd->add_option("--suite", suite, "components|depth|projector|boundary|pairing")->required();
    ablate_cmd->add_option("--seeds", seeds_text, "Comma-separated seeds");
    ablate_cmd->add_option("--config", ablate_config, "Base config (default: reference classification)")
        ->check(CLI::ExistingFile);

    std::string run_id_text;
    auto* diagnose_cmd = app.add_subcommand("diagnose", "Gradient diagnosis and stage similarity of a finished run");
    diagnose_cmd->add_option("--run", run_id_text, "Run id")->required();

    std::string runs_text, format_text = "csv", out_dir = "report";
    auto* report_cmd = app.add_subcommand("report", "Export results");
    report_cmd->add_option("--runs", runs_text, "Comma-separated run ids, or 'all'")->required();
    report_cmd->add_option("--format", format_text, "csv|jsonl|plotdata");
    report_cmd->add_option("--out", out_dir, "Output directory");

    std::string overhead_config;
    std::size_t iterations = 100;
    auto* overhead_cmd = app.add_subcommand("overhead", "Per-iteration time and parameter counts");
    overhead_cmd->add_option("--config", overhead_config, "JSON run config")->required()->check(CLI::ExistingFile);
    overhead_cmd->add_option("--iterations", iterations, "Timed iterations")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        const ResultsStore store = ResultsStore::from_environment();
        RunOptions options;
        options.store = store;
        options.force = force;
        options.log = log_line;
        if (*train_cmd) {
            RunConfig config = load_run_config(config_path);
            if (seed) {
                config.seed = *seed;
            }
            print_result(run(config, options));
        } else if (*ablate_cmd) {
            std::vector<std::uint64_t> seeds;
            for (const auto& s : split(seeds_text)) {
                seeds.push_back(std::stoull(s));
            }
            const auto table = ablation_suite(suite, config_or_reference(ablate_config), seeds, options);
            std::cout << format_table(table);
            const auto path = store.root() / ("ablation_" + suite + ".json");
            write_text_atomic(path, to_json(table).dump(2));
            std::cout << "table written to " << path.string() << '\n';
        } else if (*diagnose_cmd) {
            const auto d = diagnose_run(store, run_id_text, log_line);
            RunResult r = load_result(store, run_id_text);
            r.diagnoses = {DiagnosisRecord{1.0, r.config.epochs, d.diagnosis}};
            r.similarity = d.similarity;
            print_result(r);
        } else if (*report_cmd) {
            auto ids = runs_text == "all" ? store.run_ids() : split(runs_text);
            for (const auto& p : report(store, ids, parse_report_format(format_text), out_dir)) {
                std::cout << p.string() << '\n';
            }
        } else if (*overhead_cmd) {
            const RunConfig config = load_run_config(overhead_config);
            const TaskData data = load_or_generate_task(store, config.task, log_line);
            std::optional<TeacherHandle> teacher;
            if (uses_teacher(config.method)) {
                teacher = load_or_pretrain_teacher(store, config, data, log_line);
            }
            const auto o = measure_overhead(config, data, teacher ? &teacher->model : nullptr, iterations);
            std::printf("%.3f ms/iter over %zu iterations (%zu warmup)\n", o.ms_per_iter, o.iterations, o.warmup);
            std::printf("params: student %zu, projectors %zu, teacher (frozen) %zu\n", o.student_params,
                        o.projector_params, o.teacher_params);
        }
    } catch (const drd::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
