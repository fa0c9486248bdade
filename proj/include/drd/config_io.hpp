#pragma once

// RunConfig <-> JSON and content-addressed run ids.
//
// A config file is a JSON object. Every key is optional; missing entries take
// the reference configuration of the task kind. Unknown keys are rejected.
//
//   task      {kind, image_size, channels, n_classes, pretrain_classes,
//              downstream_classes, style_shift, noise, n_train, n_test,
//              n_pretrain, n_pretrain_test, seed}
//   teacher   {family, depth, width, head, outputs, in_channels, image_size, patch | strides}
//   student   same keys as teacher
//   pretrain  {max_epochs, batch_size, learning_rate, threshold, seed}
//   method    drd | drd_no_cka | direct_reprog | feature_mimic | vanilla
//   n_stages, teacher_boundaries, student_boundaries,
//   pairing   identity | reverse | shift_right
//   projector linear | resize_1x1 | conv2 | conv3_default | wide_conv3
//   projector_hidden, epochs, batch_size, learning_rate, weight_decay,
//   seed, diagnose
//
// vanilla configs may not set pairing, projector, projector_hidden or
// teacher_boundaries.

#include <filesystem>
#include <string>

#include "drd/config.hpp"
#include "drd/serialization.hpp"

namespace drd {

// Canonical form: defaults resolved, fields a method ignores omitted.
Json to_json(const RunConfig& config);

// Throws validation errors (unknown keys, bad values, inconsistent fields).
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);

std::string canonical_config(const RunConfig& config);

// First 16 hex digits of SHA-256 over the canonical config (seed included).
std::string run_id(const RunConfig& config);

}  // namespace drd
