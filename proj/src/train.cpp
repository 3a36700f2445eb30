#include "mva/train.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "mva/layers.h"
#include "mva/ops.h"
#include "mva/optim.h"
#include "mva/parallel.h"
#include "mva/rng.h"
#include "mva/segnet.h"

namespace mva {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw std::invalid_argument("momentum must be in [0, 1)");
    }
    if (channels < 1) throw std::invalid_argument("channels must be >= 1");
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream is(value);
    T out{};
    if (!(is >> out) || !is.eof()) {
        throw std::invalid_argument("config: bad value '" + value + "' for " + key);
    }
    if constexpr (std::is_unsigned_v<T>) {
        if (value.find('-') != std::string::npos) {
            throw std::invalid_argument("config: " + key + " must be non-negative");
        }
    }
    return out;
}

SegNetConfig net_config(const TrainConfig& cfg, std::size_t categories) {
    SegNetConfig n;
    n.channels = cfg.channels;
    n.classes = categories + 1;
    n.slot = cfg.slot;
    n.reduction = cfg.reduction;
    n.kernel = cfg.kernel;
    n.seed = cfg.seed;
    return n;
}

// Stacks images [3,H,W] into [B,3,H,W] f64 and their label maps.
struct InputStats {
    std::array<double, 3> mean{0, 0, 0};
    std::array<double, 3> inv_std{1, 1, 1};
};

// Per-channel standardization fitted on the training images.
InputStats fit_input_stats(const Dataset& ds, const Split& split) {
    InputStats st;
    const std::size_t plane = ds.spec.size * ds.spec.size;
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<double> v;
        v.reserve(split.train.size() * plane);
        for (std::size_t id : split.train) {
            const auto d = ds.images[id].data().subspan(c * plane, plane);
            v.insert(v.end(), d.begin(), d.end());
        }
        const double n = static_cast<double>(v.size());
        const double mean = ops::exact_sum(v) / n;
        for (double& x : v) x = (x - mean) * (x - mean);
        const double var = ops::exact_sum(v) / n;
        st.mean[c] = mean;
        st.inv_std[c] = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    }
    return st;
}

void make_batch(const Dataset& ds, const InputStats& st, std::span<const std::size_t> ids,
                Tensor& images, std::vector<int>& labels) {
    const std::size_t s = ds.spec.size, plane = s * s;
    images = Tensor({ids.size(), 3, s, s});
    labels.clear();
    labels.reserve(ids.size() * plane);
    auto dst = images.mutable_data();
    for (std::size_t b = 0; b < ids.size(); ++b) {
        const auto src = ds.images[ids[b]].data();
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < plane; ++i) {
                dst[(b * 3 + c) * plane + i] = (src[c * plane + i] - st.mean[c]) * st.inv_std[c];
            }
        }
        const auto lm = label_map(ds.instances[ids[b]], s, s);
        labels.insert(labels.end(), lm.begin(), lm.end());
    }
}

APReport validate_net(const ToySegNet& net, const Dataset& ds, const Split& split,
                      const InputStats& st, std::size_t batch) {
    ImageSet preds, gts;
    Tensor images;
    std::vector<int> labels;
    for (std::size_t start = 0; start < split.val.size(); start += batch) {
        const std::size_t n = std::min(batch, split.val.size() - start);
        const std::span<const std::size_t> ids(split.val.data() + start, n);
        make_batch(ds, st, ids, images, labels);
        const Tensor probs = ops::softmax_classes(net.forward(constant(images)).logits.value());
        const std::size_t k = probs.dim(1), h = probs.dim(2), w = probs.dim(3);
        const std::size_t per = k * h * w;
        for (std::size_t b = 0; b < n; ++b) {
            const auto d = probs.data().subspan(b * per, per);
            preds.push_back(extract_instances(Tensor({k, h, w}, {d.begin(), d.end()})));
            gts.push_back(ds.instances[ids[b]]);
        }
    }
    return evaluate(preds, gts);
}

}  // namespace

double cosine_lr(double base, std::size_t epoch, std::size_t epochs) {
    const double t = static_cast<double>(epoch - 1) / static_cast<double>(epochs);
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

TrainConfig parse_train_config(std::istream& is, TrainConfig cfg) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(is, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(number) +
                                        ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "slot") cfg.slot = parse_block(value);
        else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "epochs") cfg.epochs = parse_number<std::size_t>(key, value);
        else if (key == "lr") cfg.lr = parse_number<double>(key, value);
        else if (key == "momentum") cfg.momentum = parse_number<double>(key, value);
        else if (key == "channels") cfg.channels = parse_number<std::size_t>(key, value);
        else if (key == "reduction") cfg.reduction = parse_number<std::size_t>(key, value);
        else if (key == "kernel") cfg.kernel = parse_number<std::size_t>(key, value);
        else if (key == "batch") cfg.batch = parse_number<std::size_t>(key, value);
        else if (key == "dataset") cfg.dataset = value;
        else if (key == "out_dir") cfg.out_dir = value;
        else {
            throw std::invalid_argument("config line " + std::to_string(number) +
                                        ": unknown key '" + key + "'");
        }
    }
    return cfg;
}

TrainConfig load_train_config(const fs::path& path, TrainConfig base) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path.string());
    return parse_train_config(is, std::move(base));
}

std::string to_json_line(const EpochRecord& r) {
    nlohmann::json j;
    j["epoch"] = r.epoch;
    j["loss"] = r.loss;
    j["map"] = r.map;
    j["ap50"] = r.ap50;
    j["ap75"] = r.ap75;
    return j.dump();
}

Split split_dataset(std::size_t count) {
    if (count < 2) throw std::invalid_argument("dataset needs at least 2 images to split");
    const std::size_t n_val = std::max<std::size_t>(1, count / 4);
    Split s;
    for (std::size_t i = 0; i < count; ++i) (i < count - n_val ? s.train : s.val).push_back(i);
    return s;
}

std::vector<Instance> extract_instances(const Tensor& probs, std::size_t min_area) {
    if (probs.rank() != 3) {
        throw ShapeError("extract_instances: expected [K,H,W], got " + shape_string(probs.shape()));
    }
    const std::size_t k = probs.dim(0), h = probs.dim(1), w = probs.dim(2), plane = h * w;
    std::vector<std::size_t> label(plane, 0);
    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 1; c < k; ++c) {
            if (probs[c * plane + i] > probs[label[i] * plane + i]) label[i] = c;
        }
    }
    std::vector<Instance> out;
    std::vector<bool> seen(plane, false);
    std::vector<std::size_t> component, stack;
    for (std::size_t start = 0; start < plane; ++start) {
        if (seen[start] || label[start] == 0) continue;
        const std::size_t cls = label[start];
        component.clear();
        stack.assign(1, start);
        seen[start] = true;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            component.push_back(i);
            const std::size_t y = i / w, x = i % w;
            const auto visit = [&](std::size_t j) {
                if (!seen[j] && label[j] == cls) {
                    seen[j] = true;
                    stack.push_back(j);
                }
            };
            if (y > 0) visit(i - w);
            if (y + 1 < h) visit(i + w);
            if (x > 0) visit(i - 1);
            if (x + 1 < w) visit(i + 1);
        }
        if (component.size() < min_area) continue;
        std::sort(component.begin(), component.end());
        Instance inst;
        inst.category = static_cast<int>(cls);
        inst.mask = BinaryMask(h, w);
        double score = 0.0;
        for (std::size_t i : component) {
            inst.mask.set(i / w, i % w);
            score += probs[cls * plane + i];
        }
        inst.score = std::clamp(score / static_cast<double>(component.size()), 0.0, 1.0);
        out.push_back(std::move(inst));
    }
    return out;
}

TrainResult train(const TrainConfig& cfg, const Dataset& dataset) {
    cfg.validate();
    ToySegNet net(net_config(cfg, dataset.spec.categories));
    const Split split = split_dataset(dataset.images.size());
    const InputStats stats = fit_input_stats(dataset, split);

    std::vector<Var> params;
    for (const auto& p : net.parameters()) params.push_back(p.var);
    SgdState opt{cfg.lr, cfg.momentum, {}};
    Rng shuffle_rng(derive_seed(cfg.seed, 20));

    TrainResult result;
    std::vector<std::size_t> order = split.train;
    Tensor images;
    std::vector<int> labels;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }
        opt.lr = cosine_lr(cfg.lr, epoch, cfg.epochs);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t n = std::min(cfg.batch, order.size() - start);
            make_batch(dataset, stats, {order.data() + start, n}, images, labels);
            const Var logits = net.forward(constant(images)).logits;
            const Var loss = ag::softmax_ce_loss(logits, labels);
            loss_sum += loss.value()[0] * static_cast<double>(n);
            backward(loss);
            sgd_step(params, opt);
        }
        const APReport report = validate_net(net, dataset, split, stats, cfg.batch);
        result.history.push_back({epoch, loss_sum / static_cast<double>(order.size()), report.map,
                                  report.ap50.value_or(0.0), report.ap75.value_or(0.0)});
    }
    result.checkpoint = net.state();
    return result;
}

TrainResult train(const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.dataset.empty()) throw std::invalid_argument("no dataset given");
    const Dataset ds = load_dataset(cfg.dataset);
    TrainResult result = train(cfg, ds);
    if (!cfg.out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(cfg.out_dir, ec);
        if (ec) throw IoError("cannot create " + cfg.out_dir.string() + ": " + ec.message());
        save_checkpoint(cfg.out_dir / "checkpoint.mvck", result.checkpoint);
        std::ofstream os(cfg.out_dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + (cfg.out_dir / "metrics.jsonl").string());
        for (const auto& r : result.history) os << to_json_line(r) << '\n';
        if (!os) throw IoError("write failed: " + (cfg.out_dir / "metrics.jsonl").string());
    }
    return result;
}

APReport validate(const TrainConfig& cfg, const Dataset& dataset,
                  const std::vector<NamedTensor>& state) {
    ToySegNet net(net_config(cfg, dataset.spec.categories));
    net.load_state(state);
    const Split split = split_dataset(dataset.images.size());
    return validate_net(net, dataset, split, fit_input_stats(dataset, split), cfg.batch);
}

AblationResult run_ablation(const TrainConfig& base, const Dataset& dataset, BlockKind candidate,
                            BlockKind baseline, const std::vector<std::uint64_t>& seeds,
                            std::size_t threads) {
    std::vector<double> final_map(2 * seeds.size(), 0.0);
    parallel_for(final_map.size(), threads, [&](std::size_t task) {
        TrainConfig cfg = base;
        cfg.seed = seeds[task / 2];
        cfg.slot = task % 2 == 0 ? candidate : baseline;
        const TrainResult r = train(cfg, dataset);
        final_map[task] = r.history.empty() ? 0.0 : r.history.back().map;
    });
    AblationResult out;
    out.seeds = seeds;
    double diff = 0.0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        out.candidate_map.push_back(final_map[2 * i]);
        out.baseline_map.push_back(final_map[2 * i + 1]);
        if (final_map[2 * i] >= final_map[2 * i + 1]) ++out.wins;
        diff += final_map[2 * i] - final_map[2 * i + 1];
    }
    out.mean_improvement = seeds.empty() ? 0.0 : diff / static_cast<double>(seeds.size());
    return out;
}

}  // namespace mva
