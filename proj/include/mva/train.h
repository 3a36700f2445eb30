#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mva/attention.h"
#include "mva/dataset.h"
#include "mva/metrics.h"
#include "mva/tensor_io.h"

namespace mva {

struct TrainConfig {
    BlockKind slot = BlockKind::mv_adapter;
    std::uint64_t seed = 0;
    std::size_t epochs = 40;
    double lr = 0.05;
    double momentum = 0.9;
    std::size_t channels = 16;
    std::size_t reduction = 4;
    std::size_t kernel = 3;
    std::size_t batch = 4;
    std::filesystem::path dataset;
    std::filesystem::path out_dir;

    void validate() const;
};

/// Flat `key = value` text; '#' starts a comment. Keys: slot, seed, epochs,
/// lr, momentum, channels, reduction, kernel, batch, dataset, out_dir.
/// Unknown keys and unparsable values throw std::invalid_argument.
TrainConfig parse_train_config(std::istream& is, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;
    double map = 0.0;
    double ap50 = 0.0;
    double ap75 = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

/// {"ap50":..,"ap75":..,"epoch":..,"loss":..,"map":..}
std::string to_json_line(const EpochRecord& record);

struct TrainResult {
    std::vector<EpochRecord> history;
    std::vector<NamedTensor> checkpoint;
};

/// Train/validation partition: the last max(1, count / 4) images validate.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};
Split split_dataset(std::size_t count);

/// Instances from per-pixel class probabilities [K,H,W] (class 0 is
/// background): argmax labels, 4-connected components per class, components
/// under `min_area` pixels dropped. Score = mean probability of the
/// component's class over its pixels.
std::vector<Instance> extract_instances(const Tensor& probs, std::size_t min_area = 8);

/// Learning rate for 1-based `epoch` of `epochs`: half-cosine decay from
/// `base` at the first epoch toward zero.
double cosine_lr(double base, std::size_t epoch, std::size_t epochs);

/// Deterministic in cfg.seed: initialization and per-epoch shuffling derive
/// from it. Validation mAP is evaluated after every epoch.
TrainResult train(const TrainConfig& cfg, const Dataset& dataset);

/// Loads cfg.dataset, trains, and when cfg.out_dir is set writes
/// checkpoint.mvck and metrics.jsonl there.
TrainResult train(const TrainConfig& cfg);

/// Validation report of a network state on a dataset's validation split.
APReport validate(const TrainConfig& cfg, const Dataset& dataset,
                  const std::vector<NamedTensor>& state);

struct AblationResult {
    std::vector<std::uint64_t> seeds;
    std::vector<double> candidate_map;  // final validation mAP per seed
    std::vector<double> baseline_map;
    std::size_t wins = 0;  // seeds with candidate >= baseline
    double mean_improvement = 0.0;
};

/// Trains `candidate` and `baseline` slots on each seed (runs in parallel, up
/// to `threads` at a time) and compares final validation mAP.
AblationResult run_ablation(const TrainConfig& base, const Dataset& dataset, BlockKind candidate,
                            BlockKind baseline, const std::vector<std::uint64_t>& seeds,
                            std::size_t threads);

}  // namespace mva
