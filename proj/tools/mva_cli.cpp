// mva: data generation, gradient checks, training, evaluation, benchmarks.
//
// Exit codes: 0 ok, 1 check failed, 2 usage or format error, 3 I/O error.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mva/annotations.h"
#include "mva/attention.h"
#include "mva/checks.h"
#include "mva/dataset.h"
#include "mva/layers.h"
#include "mva/metrics.h"
#include "mva/rng.h"
#include "mva/tensor_io.h"
#include "mva/train.h"

using json = nlohmann::json;
using namespace mva;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;
constexpr int kIo = 3;

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// "a:b:step" or a comma list.
std::vector<double> parse_thresholds(const std::string& spec) {
    std::vector<double> out;
    const auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) throw UsageError("--thresholds: bad number '" + s + "'");
        return v;
    };
    if (std::count(spec.begin(), spec.end(), ':') == 2) {
        const auto a = spec.find(':'), b = spec.rfind(':');
        const double lo = number(spec.substr(0, a));
        const double hi = number(spec.substr(a + 1, b - a - 1));
        const double step = number(spec.substr(b + 1));
        if (!(step > 0.0) || hi < lo) throw UsageError("--thresholds: bad range '" + spec + "'");
        const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < n; ++i) out.push_back(lo + static_cast<double>(i) * step);
    } else {
        std::stringstream ss(spec);
        for (std::string item; std::getline(ss, item, ',');) out.push_back(number(item));
    }
    if (out.empty()) throw UsageError("--thresholds: empty spec");
    for (double t : out) {
        if (!(t > 0.0 && t <= 1.0)) throw UsageError("--thresholds: values must be in (0, 1]");
    }
    return out;
}

std::vector<std::size_t> parse_sizes(const std::string& spec) {
    std::vector<std::size_t> out;
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ',');) {
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size() || v == 0 || item.find('-') != std::string::npos) {
            throw UsageError("--sizes: bad size '" + item + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) throw UsageError("--sizes: empty spec");
    return out;
}

// ---- gen-data ----

struct GenArgs {
    DatasetSpec spec;
    std::string out;
};

int run_gen_data(const GenArgs& a) {
    if (a.spec.size < 16) throw UsageError("--size must be >= 16 (got " + std::to_string(a.spec.size) + ")");
    if (a.spec.count < 1) throw UsageError("--count must be >= 1");
    if (a.spec.objects < 1) throw UsageError("--objects must be >= 1");
    if (a.spec.categories < 1 || a.spec.categories > kMaxCategories) {
        throw UsageError("--categories must be in [1, " + std::to_string(kMaxCategories) + "]");
    }
    if (!(a.spec.degradation.depth >= 0.0)) throw UsageError("--depth must be >= 0");
    if (!(a.spec.degradation.scatter_sigma >= 0.0)) throw UsageError("--sigma must be >= 0");
    const auto& h = a.spec.degradation.haze;
    if (!(h >= 0.0 && h < 1.0)) throw UsageError("--haze must be in [0, 1)");
    const Dataset ds = generate_dataset(a.spec);
    write_dataset(a.out, ds);
    std::cerr << "wrote " << ds.images.size() << " images to " << a.out << "\n";
    std::cout << manifest_json(ds) << "\n";
    return kOk;
}

// ---- gradcheck ----

int run_gradcheck(const std::string& block, std::uint64_t seed, double tol) {
    if (block != "segnet") {
        const BlockKind kind = [&] {
            try {
                return parse_block(block);
            } catch (const std::invalid_argument&) {
                throw UsageError("--block: unknown block '" + block + "'");
            }
        }();
        if (kind == BlockKind::none) throw UsageError("--block: 'none' has no parameters to check");
    }
    if (!(tol > 0.0)) throw UsageError("--tol must be > 0");
    const GradcheckReport r = named_gradcheck(block, seed, tol);
    json j;
    j["block"] = block;
    j["seed"] = seed;
    j["tol"] = tol;
    j["max_rel_err"] = r.max_rel_err;
    j["checked"] = r.checked;
    j["pass"] = r.pass;
    std::cout << j.dump() << "\n";
    return r.pass ? kOk : kCheckFailed;
}

// ---- train ----

struct TrainArgs {
    std::string config;
    std::optional<std::string> slot;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs, channels, reduction, kernel, batch;
    std::optional<double> lr, momentum;
    std::optional<std::string> dataset, out;
};

int run_train(const TrainArgs& a) {
    TrainConfig cfg;
    if (!a.config.empty()) cfg = load_train_config(a.config);
    if (a.slot) cfg.slot = parse_block(*a.slot);
    if (a.seed) cfg.seed = *a.seed;
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.channels) cfg.channels = *a.channels;
    if (a.reduction) cfg.reduction = *a.reduction;
    if (a.kernel) cfg.kernel = *a.kernel;
    if (a.batch) cfg.batch = *a.batch;
    if (a.lr) cfg.lr = *a.lr;
    if (a.momentum) cfg.momentum = *a.momentum;
    if (a.dataset) cfg.dataset = *a.dataset;
    if (a.out) cfg.out_dir = *a.out;
    if (cfg.dataset.empty()) throw UsageError("no dataset: pass --dataset or set it in --config");
    cfg.validate();
    std::cerr << "training slot=" << block_name(cfg.slot) << " seed=" << cfg.seed
              << " epochs=" << cfg.epochs << "\n";
    const TrainResult r = train(cfg);
    for (const auto& rec : r.history) std::cout << to_json_line(rec) << "\n";
    if (!cfg.out_dir.empty()) std::cerr << "wrote " << cfg.out_dir.string() << "\n";
    return kOk;
}

// ---- eval ----

json report_json(const APReport& r) {
    json j;
    j["map"] = r.map;
    j["ap50"] = optional_json(r.ap50);
    j["ap75"] = optional_json(r.ap75);
    json per = json::array();
    for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
        per.push_back({{"threshold", r.thresholds[i]}, {"ap", r.ap_per_threshold[i]}});
    }
    j["per_threshold"] = per;
    return j;
}

int run_eval(const std::string& pred, const std::string& gt, const std::string& thresholds) {
    const std::vector<double> t = thresholds.empty() ? default_thresholds() : parse_thresholds(thresholds);
    const auto preds = load_annotations(pred);
    const auto gts = load_annotations(gt);
    ImageSet p, g;
    group_by_image(preds, gts, p, g);
    if (p.empty()) {
        std::cout << report_json(APReport{t, std::vector<double>(t.size(), 0.0), 0.0, {}, {}}).dump()
                  << "\n";
        return kOk;
    }
    std::cout << report_json(evaluate(p, g, t)).dump() << "\n";
    return kOk;
}

// ---- bench ----

template <typename F>
double median_ms(std::size_t reps, F&& f) {
    std::vector<double> times;
    for (std::size_t i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    const std::size_t n = times.size();
    return n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
}

Tensor random_tensor(Rng& rng, const Shape& shape) {
    Tensor t(shape);
    for (double& v : t.mutable_data()) v = rng.uniform(-1.0, 1.0);
    return t;
}

int run_bench(const std::string& op, const std::string& sizes_spec, std::size_t reps) {
    if (op != "mv_forward" && op != "conv3x3" && op != "evaluate") {
        throw UsageError("--op must be mv_forward, conv3x3 or evaluate");
    }
    if (reps < 1) throw UsageError("--reps must be >= 1");
    const auto sizes = parse_sizes(sizes_spec);
    constexpr std::size_t kChannels = 16;
    std::cout << "op,size,reps,median_ms,items_per_s\n";
    for (std::size_t s : sizes) {
        Rng rng(derive_seed(7, s));
        double ms = 0.0, items = 0.0;
        if (op == "mv_forward") {
            AttentionConfig cfg;
            cfg.channels = kChannels;
            const MVAdapterParams params = init_params(cfg);
            const Tensor x = random_tensor(rng, {1, kChannels, s, s});
            ms = median_ms(reps, [&] { (void)mv_adapter_forward(params, x); });
            items = static_cast<double>(x.numel());
        } else if (op == "conv3x3") {
            const Tensor x = random_tensor(rng, {1, kChannels, s, s});
            const Tensor w = random_tensor(rng, {kChannels, kChannels, 3, 3});
            const Tensor b = random_tensor(rng, {kChannels});
            ms = median_ms(reps, [&] { (void)ops::conv3x3(x, w, b); });
            items = static_cast<double>(x.numel());
        } else {
            // s x s masks, 4 images with 3 gts and 6 predictions each.
            if (s < 16) throw UsageError("--sizes: evaluate needs sizes >= 16");
            ImageSet preds, gts;
            for (std::uint64_t i = 0; i < 4; ++i) {
                const SceneSample scene = generate_scene(derive_seed(s, i), s, s, 3, 3);
                gts.push_back(scene.instances);
                std::vector<Instance> p;
                for (std::size_t k = 0; k < 6; ++k) {
                    Instance inst = scene.instances[k % scene.instances.size()];
                    for (std::size_t flips = 0; flips < s; ++flips) {
                        const std::size_t r = rng.below(s), c = rng.below(s);
                        inst.mask.set(r, c, !inst.mask.get(r, c));
                    }
                    inst.score = rng.uniform();
                    p.push_back(std::move(inst));
                }
                preds.push_back(std::move(p));
            }
            ms = median_ms(reps, [&] { (void)evaluate(preds, gts); });
            items = 4.0 * 6.0 * static_cast<double>(s * s);
        }
        const double rate = ms > 0.0 ? items / (ms / 1000.0) : 0.0;
        std::cout << op << "," << s << "," << reps << "," << ms << "," << rate << "\n";
    }
    return kOk;
}

// ---- inspect ----

int run_inspect(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    const std::string magic(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(4, bytes.size())));
    json j;
    const auto tensor_json = [](const Tensor& t) {
        json s = json::array();
        for (std::size_t d : t.shape()) s.push_back(d);
        const auto d = t.data();
        return json{{"dtype", dtype_name(t.dtype())},
                    {"shape", s},
                    {"numel", t.numel()},
                    {"min", *std::min_element(d.begin(), d.end())},
                    {"max", *std::max_element(d.begin(), d.end())}};
    };
    if (magic == "MVTN") {
        j = tensor_json(decode_tensor(bytes));
        j["kind"] = "tensor";
    } else if (magic == "MVCK") {
        std::istringstream is(std::string(bytes.begin(), bytes.end()));
        const auto ck = read_checkpoint(is);
        json list = json::array();
        std::size_t total = 0;
        for (const auto& [name, t] : ck) {
            json e = tensor_json(t);
            e["name"] = name;
            list.push_back(e);
            total += t.numel();
        }
        j = {{"kind", "checkpoint"}, {"tensors", list}, {"params", total}};
    } else {
        throw FormatError(path + ": not an MVTN or MVCK file");
    }
    std::cout << j.dump(2) << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Underwater channel-attention toolkit"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic underwater dataset");
    gen_cmd->add_option("--seed", gen.spec.seed, "dataset seed")->capture_default_str();
    gen_cmd->add_option("--count", gen.spec.count, "number of images")->capture_default_str();
    gen_cmd->add_option("--size", gen.spec.size, "image side in pixels (>= 16)")->capture_default_str();
    gen_cmd->add_option("--objects", gen.spec.objects, "objects per image")->capture_default_str();
    gen_cmd->add_option("--categories", gen.spec.categories, "category count")->capture_default_str();
    gen_cmd->add_option("--depth", gen.spec.degradation.depth, "water depth")->capture_default_str();
    gen_cmd->add_option("--sigma", gen.spec.degradation.scatter_sigma, "scatter noise std")->capture_default_str();
    gen_cmd->add_option("--haze", gen.spec.degradation.haze, "ambient blend in [0,1)")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "output directory")->required();

    std::string block;
    std::uint64_t gc_seed = 0;
    double tol = 1e-4;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check");
    gc_cmd->add_option("--block", block, "mv_adapter|color_attention|se|eca|segnet")->required();
    gc_cmd->add_option("--seed", gc_seed, "input seed")->capture_default_str();
    gc_cmd->add_option("--tol", tol, "max relative error")->capture_default_str();

    TrainArgs tr;
    auto* tr_cmd = app.add_subcommand("train", "Train the toy segmentation net");
    tr_cmd->add_option("--config", tr.config, "key = value config file");
    tr_cmd->add_option("--slot", tr.slot, "none|mv_adapter|color_attention|se|eca");
    tr_cmd->add_option("--seed", tr.seed);
    tr_cmd->add_option("--epochs", tr.epochs);
    tr_cmd->add_option("--lr", tr.lr);
    tr_cmd->add_option("--momentum", tr.momentum);
    tr_cmd->add_option("--channels", tr.channels);
    tr_cmd->add_option("--reduction", tr.reduction);
    tr_cmd->add_option("--kernel", tr.kernel);
    tr_cmd->add_option("--batch", tr.batch);
    tr_cmd->add_option("--dataset", tr.dataset, "dataset directory");
    tr_cmd->add_option("--out", tr.out, "output directory for checkpoint and metrics");

    std::string pred, gt, thresholds;
    auto* ev_cmd = app.add_subcommand("eval", "Mask AP of predictions against ground truth");
    ev_cmd->add_option("--pred", pred, "prediction JSON-lines file")->required();
    ev_cmd->add_option("--gt", gt, "ground-truth JSON-lines file")->required();
    ev_cmd->add_option("--thresholds", thresholds, "lo:hi:step or comma list (default 0.50:0.95:0.05)");

    std::string op, sizes = "32,64,128";
    std::size_t reps = 5;
    auto* bench_cmd = app.add_subcommand("bench", "Micro-benchmarks, CSV on stdout");
    bench_cmd->add_option("--op", op, "mv_forward|conv3x3|evaluate")->required();
    bench_cmd->add_option("--sizes", sizes, "comma-separated image sides")->capture_default_str();
    bench_cmd->add_option("--reps", reps, "repetitions per size")->capture_default_str();

    std::string inspect_path;
    auto* in_cmd = app.add_subcommand("inspect", "Summarize an MVTN or MVCK file as JSON");
    in_cmd->add_option("path", inspect_path, "file to inspect")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*gen_cmd) return run_gen_data(gen);
        if (*gc_cmd) return run_gradcheck(block, gc_seed, tol);
        if (*tr_cmd) return run_train(tr);
        if (*ev_cmd) return run_eval(pred, gt, thresholds);
        if (*bench_cmd) return run_bench(op, sizes, reps);
        if (*in_cmd) return run_inspect(inspect_path);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kCheckFailed;
    }
    return kUsage;
}
