#pragma once

// Experiment orchestration: cached datasets and teachers, persisted runs,
// ablation suites and reports.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drd/config_io.hpp"
#include "drd/cotraining.hpp"
#include "drd/diagnostics.hpp"
#include "drd/pretrain.hpp"
#include "drd/store.hpp"

namespace drd {

using LogFn = std::function<void(const std::string&)>;

// Task splits for `spec`, generated once per store.
TaskData load_or_generate_task(const ResultsStore& store, const SyntheticTaskSpec& spec, const LogFn& log = {});

struct TeacherHandle {
    BlockSequence model;
    PretrainReport report;
    std::string key;
    bool cached = false;
};

// Cache key: pretraining-relevant task fields, teacher spec, pretrain config.
std::string teacher_key(const RunConfig& config);

// Pretrained teacher for `config`, trained once per store.
TeacherHandle load_or_pretrain_teacher(const ResultsStore& store, const RunConfig& config, const TaskData& data,
                                       const LogFn& log = {});

struct DiagnosisRecord {
    double fraction = 0.0;  // of total epochs
    std::size_t epoch = 0;  // completed epochs at the snapshot
    GradientDiagnosis diagnosis;
};

struct RunResult {
    std::string run_id;
    RunConfig config;
    double initial_metric = 0.0;
    double final_metric = 0.0;
    double best_metric = 0.0;
    std::vector<EpochRecord> history;
    std::vector<DiagnosisRecord> diagnoses;
    std::optional<SimilarityMatrix> similarity;
    ConvergenceSummary convergence;
    double teacher_pretrain_metric = 0.0;
    // Largest |l_train - sum of weighted terms| over all steps.
    double max_identity_residual = 0.0;
    bool teacher_unchanged = true;
    std::size_t steps = 0;
    double seconds = 0.0;
    double ms_per_step = 0.0;
    std::filesystem::path checkpoint;
    bool cached = false;  // not persisted
};

Json to_json(const RunResult& result);
RunResult run_result_from_json(const Json& j);

struct RunOptions {
    std::optional<ResultsStore> store;  // unset: ResultsStore::from_environment()
    // Recompute even when a result exists.
    bool force = false;
    LogFn log;
};

// Completed epochs at which the 25/50/75% diagnoses are taken.
std::vector<std::pair<double, std::size_t>> diagnosis_schedule(std::size_t epochs);

// Training indices of the fixed diagnosis batch.
std::vector<std::size_t> diagnosis_batch(const TaskData& data);

// Validates, trains and persists; returns the stored result when the run id
// already has one.
RunResult run(const RunConfig& config, const RunOptions& options = {});

// Throws not_found for an unknown id.
RunResult load_result(const ResultsStore& store, const std::string& id);

// Session whose student and projectors hold the run's final checkpoint.
// Heap members keep the session's borrowed references valid across moves.
struct RestoredRun {
    std::unique_ptr<RunConfig> config;
    std::unique_ptr<TaskData> data;
    std::unique_ptr<TeacherHandle> teacher;
    std::unique_ptr<Session> session;
};
RestoredRun restore_run(const ResultsStore& store, const std::string& id, const LogFn& log = {});

// Gradient diagnosis and stage similarity of a finished run, appended to its
// event stream.
struct DiagnoseReport {
    GradientDiagnosis diagnosis;
    std::optional<SimilarityMatrix> similarity;
};
DiagnoseReport diagnose_run(const ResultsStore& store, const std::string& id, const LogFn& log = {});

// feature_mimic run of `config`.
RunResult baseline_feature_mimic(RunConfig config, const RunOptions& options = {});

struct ArmSpec {
    std::string name;
    RunConfig config;
};

// components | depth | projector | boundary | pairing. The first arm is the
// baseline.
std::vector<ArmSpec> suite_arms(std::string_view suite, const RunConfig& base);

struct ArmSummary {
    std::string name;
    std::vector<std::string> run_ids;
    std::vector<double> metrics;
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation
    // Paired t-test against the baseline arm; unset for the baseline itself
    // and when the differences are degenerate.
    std::optional<double> p_value;
    std::optional<double> t_statistic;
    bool diverged = false;  // any seed
};

struct AblationTable {
    std::string suite;
    std::string baseline;
    std::vector<std::uint64_t> seeds;
    std::vector<ArmSummary> arms;
};

AblationTable ablation_suite(std::string_view suite, const RunConfig& base, std::span<const std::uint64_t> seeds,
                             const RunOptions& options = {});

Json to_json(const AblationTable& table);
// Fixed-width text table, metrics to one decimal.
std::string format_table(const AblationTable& table);

enum class ReportFormat { csv, jsonl, plotdata };
ReportFormat parse_report_format(std::string_view name);

// csv:      runs.csv, one row per run
// jsonl:    runs.jsonl, a header record then one record per run
// plotdata: <id>.curves.csv per run and <id>.similarity.csv when present
// Returns the files written. Throws not_found for a missing run id.
std::vector<std::filesystem::path> report(const ResultsStore& store, std::span<const std::string> run_ids,
                                          ReportFormat format, const std::filesystem::path& out_dir);

// Column names and numeric parsing of runs.csv.
std::vector<std::string> csv_columns();
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace drd
