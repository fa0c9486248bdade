#include "drd/supervision.hpp"

#include <algorithm>
#include <numeric>

#include "drd/error.hpp"
#include "drd/kernels.hpp"
#include "drd/ops.hpp"

namespace drd {

Target make_target(const Dataset& data, std::span<const std::size_t> indices, TaskKind kind) {
    Target target;
    if (kind == TaskKind::classification) {
        target.labels = batch_labels(data, indices);
    } else {
        target.masks = batch_masks(data, indices);
    }
    return target;
}

Tensor task_loss(const Tensor& logits, const Target& target, TaskKind kind) {
    if (kind == TaskKind::classification) {
        return kernels::cross_entropy(logits, target.labels);
    }
    require(logits.rank() == 4 && logits.dim(1) == 2, "segmentation logits must be (B, 2, H, W)");
    return kernels::dice_loss(ops::select_channel(ops::softmax(logits), 1), target.masks);
}

double task_metric(const Tensor& logits, const Target& target, TaskKind kind) {
    auto z = logits.data();
    if (kind == TaskKind::classification) {
        const std::size_t b = logits.dim(0), c = logits.dim(1);
        require(target.labels.size() == b, "task_metric: label count mismatch");
        std::size_t correct = 0;
        for (std::size_t i = 0; i < b; ++i) {
            const auto row = z.subspan(i * c, c);
            const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
            correct += best == target.labels[i] ? 1 : 0;
        }
        return 100.0 * static_cast<double>(correct) / static_cast<double>(b);
    }
    const std::size_t b = logits.dim(0), area = logits.dim(2) * logits.dim(3);
    require(target.masks.numel() == b * area, "task_metric: mask shape mismatch");
    auto t = target.masks.data();
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        double inter = 0.0, pred = 0.0, truth = 0.0;
        for (std::size_t p = 0; p < area; ++p) {
            const bool fg = z[(i * 2 + 1) * area + p] > z[(i * 2) * area + p];
            const double y = t[i * area + p];
            inter += fg ? y : 0.0;
            pred += fg ? 1.0 : 0.0;
            truth += y;
        }
        total += pred + truth == 0.0 ? 1.0 : 2.0 * inter / (pred + truth);
    }
    return 100.0 * total / static_cast<double>(b);
}

double evaluate(const BlockSequence& model, const Dataset& data, TaskKind kind, std::size_t batch_size) {
    require(data.size() > 0, "evaluate: empty dataset");
    NoGradGuard no_grad;
    double weighted = 0.0;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const auto idx = iota_indices(start, std::min(data.size(), start + batch_size));
        const Tensor logits = model.forward(batch_images(data, idx));
        weighted += task_metric(logits, make_target(data, idx, kind), kind) * static_cast<double>(idx.size());
    }
    return weighted / static_cast<double>(data.size());
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, Rng& rng) {
    require(batch_size >= 1, "batch_size must be positive");
    std::vector<std::size_t> order = iota_indices(0, count);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < count; start += batch_size) {
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(count, start + batch_size)));
    }
    if (batches.size() >= 2 && batches.back().size() < 2) {
        auto tail = std::move(batches.back());
        batches.pop_back();
        batches.back().insert(batches.back().end(), tail.begin(), tail.end());
    }
    return batches;
}

std::vector<std::size_t> iota_indices(std::size_t begin, std::size_t end) {
    std::vector<std::size_t> idx(end > begin ? end - begin : 0);
    std::iota(idx.begin(), idx.end(), begin);
    return idx;
}

Tensor gather(const Tensor& rows, std::span<const std::size_t> indices) {
    require(rows.rank() >= 1, "gather: needs a batch axis");
    const std::size_t stride = rows.numel() / rows.dim(0);
    Shape shape = rows.shape();
    shape[0] = indices.size();
    std::vector<double> values(indices.size() * stride);
    auto src = rows.data();
    for (std::size_t b = 0; b < indices.size(); ++b) {
        require(indices[b] < rows.dim(0), "gather: index out of range");
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(indices[b] * stride), stride,
                    values.begin() + static_cast<std::ptrdiff_t>(b * stride));
    }
    return Tensor(std::move(shape), std::move(values));
}

}  // namespace drd
