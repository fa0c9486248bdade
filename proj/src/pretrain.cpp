#include "drd/pretrain.hpp"

#include <algorithm>
#include <Eigen/Dense>

#include "drd/error.hpp"
#include "drd/ops.hpp"
#include "drd/supervision.hpp"

namespace drd {

double default_pretrain_threshold(TaskKind kind) { return kind == TaskKind::classification ? 90.0 : 85.0; }

PretrainReport pretrain_teacher(BlockSequence& teacher, const Dataset& train, const Dataset& heldout, TaskKind kind,
                                const PretrainOptions& options) {
    require(teacher.has_head(), "pretrain_teacher: teacher needs a pretraining head");
    require(train.size() >= 2 && heldout.size() >= 1, "pretrain_teacher: empty pretraining split");
    PretrainReport report;
    if (options.max_epochs == 0) {
        return report;
    }
    const double threshold = options.threshold.value_or(default_pretrain_threshold(kind));
    AdamWOptions opt;
    opt.learning_rate = options.learning_rate;
    AdamW optimizer(teacher.parameters(), opt);
    Rng rng(derive_seed(options.seed, 0x7e4c));
    for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
        // Linear decay to a tenth of the base rate over the epoch budget.
        const double progress = static_cast<double>(epoch) / static_cast<double>(options.max_epochs);
        optimizer.set_learning_rate(options.learning_rate * (1.0 - 0.9 * progress));
        for (const auto& batch : epoch_batches(train.size(), options.batch_size, rng)) {
            optimizer.zero_grad();
            Tensor loss = task_loss(teacher.forward(batch_images(train, batch)), make_target(train, batch, kind), kind);
            loss.backward();
            optimizer.step();
        }
        report.epochs_run = epoch + 1;
        report.heldout_metric = evaluate(teacher, heldout, kind);
        report.epoch_metrics.push_back(report.heldout_metric);
        if (options.on_epoch) {
            options.on_epoch(report.epochs_run, report.heldout_metric);
        }
        if (report.heldout_metric >= threshold) {
            return report;
        }
    }
    fail(ErrorKind::pretraining_failure, "teacher reached " + std::to_string(report.heldout_metric) +
                                             " on held-out pretraining data after " +
                                             std::to_string(options.max_epochs) + " epochs; threshold " +
                                             std::to_string(threshold));
}

std::vector<std::vector<double>> pooled_features(const BlockSequence& backbone, const Dataset& data) {
    NoGradGuard no_grad;
    std::vector<std::vector<double>> rows;
    rows.reserve(data.size());
    constexpr std::size_t kChunk = 100;
    for (std::size_t start = 0; start < data.size(); start += kChunk) {
        const auto idx = iota_indices(start, std::min(data.size(), start + kChunk));
        const Tensor pooled = ops::global_avg_pool(backbone.run(batch_images(data, idx), 0, backbone.size() - 1));
        const std::size_t c = pooled.dim(1);
        auto v = pooled.data();
        for (std::size_t b = 0; b < idx.size(); ++b) {
            rows.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(b * c),
                              v.begin() + static_cast<std::ptrdiff_t>((b + 1) * c));
        }
    }
    return rows;
}

double linear_probe_accuracy(const BlockSequence& backbone, const Dataset& train, const Dataset& test, double ridge) {
    require(train.size() >= 1 && test.size() >= 1, "linear_probe_accuracy: empty split");
    const auto fit_rows = pooled_features(backbone, train);
    const auto eval_rows = pooled_features(backbone, test);
    const std::size_t d = fit_rows.front().size();
    const int classes = 1 + std::max(*std::max_element(train.labels.begin(), train.labels.end()),
                                     *std::max_element(test.labels.begin(), test.labels.end()));
    auto design = [d](const std::vector<std::vector<double>>& rows) {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d + 1));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
            }
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = 1.0;
        }
        return x;
    };
    const Eigen::MatrixXd x = design(fit_rows);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), classes);
    for (std::size_t i = 0; i < train.size(); ++i) {
        y(static_cast<Eigen::Index>(i), train.labels[i]) = 1.0;
    }
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += ridge * static_cast<double>(train.size());
    const Eigen::MatrixXd w = gram.ldlt().solve(x.transpose() * y);
    const Eigen::MatrixXd scores = design(eval_rows) * w;
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index best = 0;
        scores.row(i).maxCoeff(&best);
        correct += static_cast<int>(best) == test.labels[static_cast<std::size_t>(i)] ? 1 : 0;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace drd
