#include "saten/commands.hpp"

#include "saten/bundle.hpp"
#include "saten/config.hpp"
#include "saten/errors.hpp"
#include "saten/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

namespace saten::cli {

namespace {

using nlohmann::json;

json cost_report_json(const CostReport& r) {
    json j;
    j["params_tt"] = r.params_tt;
    j["params_sparse"] = r.params_sparse;
    j["params_total"] = r.params_total;
    j["density"] = r.density;
    j["mac_tt"] = r.mac_tt;
    j["mac_saten"] = r.mac_saten;
    j["dense_params"] = r.dense_params;
    j["dense_macs"] = r.dense_macs;
    j["compression_ratio"] = r.compression_ratio;
    j["storage_bytes"] = r.storage_bytes;
    if (!r.fold_fallback.empty()) j["fold_fallback"] = r.fold_fallback;
    return j;
}

std::size_t worker_pool_size() {
    if (const char* env = std::getenv("SATEN_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<std::size_t>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

struct Totals {
    std::int64_t params_total = 0;
    std::int64_t dense_params = 0;
    std::int64_t mac_saten = 0;
    std::int64_t dense_macs = 0;
    std::int64_t params_tt = 0;
    std::int64_t params_sparse = 0;

    void add(const CostReport& r) {
        params_total += r.params_total;
        dense_params += r.dense_params;
        mac_saten += r.mac_saten;
        dense_macs += r.dense_macs;
        params_tt += r.params_tt;
        params_sparse += r.params_sparse;
    }

    json to_json() const {
        json j;
        j["params_total"] = params_total;
        j["params_tt"] = params_tt;
        j["params_sparse"] = params_sparse;
        j["dense_params"] = dense_params;
        j["mac_saten"] = mac_saten;
        j["dense_macs"] = dense_macs;
        j["compression_ratio"] =
            params_total > 0 ? static_cast<double>(dense_params) / params_total : 0.0;
        j["mac_reduction"] =
            mac_saten > 0 ? static_cast<double>(dense_macs) / mac_saten : 0.0;
        return j;
    }
};

double rel_error(const DenseTensor& reference, const DenseTensor& candidate) {
    double num = 0.0, den = 0.0;
    for (std::int64_t i = 0; i < reference.numel(); ++i) {
        const double d = reference[i] - candidate[i];
        num += d * d;
        den += reference[i] * reference[i];
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

} // namespace

std::vector<std::int64_t> load_token_stream(const std::filesystem::path& path,
                                            const std::string& format) {
    std::vector<std::int64_t> out;
    if (format == "text") {
        std::ifstream in(path);
        if (!in) throw FormatError("cannot open token file " + path.string());
        std::int64_t id;
        while (in >> id) out.push_back(id);
        if (!in.eof()) throw FormatError("non-integer content in token file " + path.string());
    } else if (format == "bin") {
        std::ifstream in(path, std::ios::binary | std::ios::ate);
        if (!in) throw FormatError("cannot open token file " + path.string());
        const auto bytes = static_cast<std::size_t>(in.tellg());
        if (bytes % 4 != 0)
            throw FormatError("binary token file length is not a multiple of 4");
        std::vector<std::int32_t> raw(bytes / 4);
        in.seekg(0);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
        out.assign(raw.begin(), raw.end());
    } else {
        throw ConfigError("unknown token format '" + format + "' (use text or bin)");
    }
    return out;
}

int run_compress(const CompressArgs& args, std::ostream& log) {
    Bundle input = load_bundle(args.input);
    CompressionConfig config = CompressionConfig::parse_file(args.config);

    std::vector<std::int64_t> token_stream;
    if (!args.tokens.empty()) token_stream = load_token_stream(args.tokens, args.token_format);

    std::vector<std::string> names;
    for (const auto& [name, tensor] : input.tensors)
        if (tensor.order() == 2) names.push_back(name);
    for (const std::string& glob : config.unmatched_rules(names))
        log << "warning: rule '" << glob << "' matched no layers\n";

    struct Task {
        std::string name;
        const DenseTensor* w;
        CompressOptions opts;
        TokenFrequencyTable freq;
    };
    std::vector<Task> tasks;
    for (const std::string& name : names) {
        auto opts = config.options_for(name);
        if (!opts) continue;
        Task task{name, &input.tensors.at(name), *opts, {}};
        if (opts->pattern == SparsityPattern::row) {
            if (args.tokens.empty())
                throw ConfigError("layer '" + name + "' uses row sparsity but no --tokens file was given");
            task.freq = count_token_frequencies(token_stream, task.w->dim(0));
            task.opts.freq = &task.freq;
        }
        tasks.push_back(std::move(task));
    }
    for (Task& t : tasks)
        if (t.opts.pattern == SparsityPattern::row) t.opts.freq = &t.freq;

    // fan out over a worker pool; results land in name order regardless
    std::vector<std::optional<SatenLayer>> results(tasks.size());
    std::vector<std::exception_ptr> failures(tasks.size());
    {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                try {
                    results[i] = compress(*tasks[i].w, tasks[i].opts);
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        const std::size_t n = std::min(worker_pool_size(), std::max<std::size_t>(tasks.size(), 1));
        for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (failures[i]) std::rethrow_exception(failures[i]);

    Bundle output;
    output.tensors = input.tensors;
    json layer_reports = json::object();
    Totals totals;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const std::string& name = tasks[i].name;
        output.tensors.erase(name);
        CostReport r = cost_report(*results[i]);
        totals.add(r);
        layer_reports[name] = cost_report_json(r);
        log << name << ": P=" << r.params_total << " (" << std::fixed << std::setprecision(2)
            << r.compression_ratio << "x params, "
            << static_cast<double>(r.dense_macs) / static_cast<double>(r.mac_saten)
            << "x MACs)" << std::defaultfloat << "\n";
        output.layers.emplace(name, std::move(*results[i]));
    }
    save_bundle(output, args.output);

    if (!args.report.empty()) {
        json report;
        report["schema"] = 1;
        report["layers"] = std::move(layer_reports);
        report["totals"] = totals.to_json();
        std::ofstream out(args.report, std::ios::trunc);
        if (!out) throw FormatError("cannot write report " + args.report.string());
        out << report.dump(2) << "\n";
    }
    return 0;
}

int run_verify(const VerifyArgs& args, std::ostream& log) {
    Bundle original = load_bundle(args.original);
    Bundle compressed = load_bundle(args.compressed);

    bool aligned = true;
    for (const auto& [name, layer] : compressed.layers) {
        if (!original.tensors.contains(name)) {
            log << "missing in original: " << name << "\n";
            aligned = false;
        }
    }
    if (!aligned) return 1;

    // fp32 serialization floor on the recomputed error bounds
    constexpr double kFp32Slack = 1e-5;
    bool all_pass = true;
    for (const auto& [name, layer] : compressed.layers) {
        const DenseTensor& w = original.tensors.at(name);
        if (w.shape() != Shape{layer.n_rows(), layer.n_cols()}) {
            log << name << ": FAIL (shape mismatch)\n";
            all_pass = false;
            continue;
        }
        DenseTensor w_tt = fold(reconstruct(layer.tt()), {layer.n_rows(), layer.n_cols()});
        const double err_tt = rel_error(w, w_tt);
        const double err_total = rel_error(w, layer.densify());

        SynthRng rng(0x5eedULL);
        double max_dev = 0.0;
        DenseTensor w_hat = layer.densify();
        for (std::int64_t s = 0; s < args.samples; ++s) {
            DenseTensor x = DenseTensor::zeros({layer.n_rows()});
            for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform_sym();
            DenseTensor y = forward(layer, x);
            DenseTensor y_ref = contract(w_hat, x, ContractionPattern{{{0, 0}}});
            max_dev = std::max(max_dev, rel_error(y_ref, y));
        }

        const bool pass = err_tt <= layer.epsilon() + kFp32Slack &&
                          err_total <= err_tt + kFp32Slack && max_dev <= kFp32Slack;
        log << name << ": tt_err=" << err_tt << " total_err=" << err_total
            << " fwd_dev=" << max_dev << " eps=" << layer.epsilon() << " "
            << (pass ? "PASS" : "FAIL") << "\n";
        all_pass = all_pass && pass;
    }
    return all_pass ? 0 : 1;
}

int run_finetune(const FinetuneArgs& args, std::ostream& log) {
    Bundle bundle = load_bundle(args.compressed);
    Bundle data = load_bundle(args.data);

    for (auto& [name, layer] : bundle.layers) {
        auto xs = data.tensors.find(name + "/x");
        auto ys = data.tensors.find(name + "/y");
        if (xs == data.tensors.end() || ys == data.tensors.end()) continue;
        const DenseTensor& x_all = xs->second;
        const DenseTensor& y_all = ys->second;
        if (x_all.order() != 2 || y_all.order() != 2 || x_all.dim(0) != y_all.dim(0) ||
            x_all.dim(1) != layer.n_rows() || y_all.dim(1) != layer.n_cols())
            throw ShapeError("fine-tuning data for '" + name + "' has inconsistent shapes");
        const std::int64_t samples = x_all.dim(0);

        const std::int64_t print_every = std::max<std::int64_t>(1, args.steps / 10);
        for (std::int64_t step = 0; step < args.steps; ++step) {
            const std::int64_t s = step % samples;
            DenseTensor x = DenseTensor::zeros({layer.n_rows()});
            for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = x_all[s * x.numel() + i];
            DenseTensor target = DenseTensor::zeros({layer.n_cols()});
            for (std::int64_t i = 0; i < target.numel(); ++i)
                target[i] = y_all[s * target.numel() + i];

            DenseTensor y = forward(layer, x);
            double loss = 0.0;
            DenseTensor g = DenseTensor::zeros({layer.n_cols()});
            for (std::int64_t i = 0; i < y.numel(); ++i) {
                g[i] = y[i] - target[i];
                loss += 0.5 * g[i] * g[i];
            }
            if (!std::isfinite(loss))
                throw DataError("loss diverged at step " + std::to_string(step) +
                                " on layer '" + name + "' (lr too high?)");
            BackwardResult back = backward(layer, x, g);
            layer = sgd_step(layer, back.grads, args.lr);
            if (step % print_every == 0 || step + 1 == args.steps)
                log << name << " step " << step << " loss " << loss << "\n";
        }
    }

    save_bundle(bundle, args.output.empty() ? args.compressed : args.output);
    return 0;
}

int run_synth(const SynthArgs& args, std::ostream& log) {
    SynthOptions opts;
    opts.rows = args.rows;
    opts.cols = args.cols;
    opts.rank = args.rank;
    opts.spikes = args.spikes;
    opts.noise = args.noise;
    opts.seed = args.seed;

    Bundle bundle;
    bundle.tensors.emplace(args.name, synth_matrix(opts));
    save_bundle(bundle, args.output);
    log << "wrote " << args.rows << "x" << args.cols << " '" << args.name << "' to "
        << args.output.string() << "\n";
    return 0;
}

int run_report(const ReportArgs& args, std::ostream& log) {
    Bundle bundle = load_bundle(args.compressed);

    if (args.format == "json") {
        json report;
        report["schema"] = 1;
        report["layers"] = json::object();
        Totals totals;
        for (const auto& [name, layer] : bundle.layers) {
            CostReport r = cost_report(layer);
            totals.add(r);
            report["layers"][name] = cost_report_json(r);
        }
        report["totals"] = totals.to_json();
        log << report.dump(2) << "\n";
        return 0;
    }
    if (args.format != "table")
        throw ConfigError("unknown report format '" + args.format + "' (use table or json)");

    log << std::left << std::setw(32) << "layer" << std::right << std::setw(10) << "L_lin%"
        << std::setw(10) << "rho%" << std::setw(14) << "MAC red." << "\n";
    Totals totals;
    for (const auto& [name, layer] : bundle.layers) {
        CostReport r = cost_report(layer);
        totals.add(r);
        log << std::left << std::setw(32) << name << std::right << std::fixed
            << std::setprecision(2) << std::setw(10)
            << 100.0 * static_cast<double>(r.params_tt) / static_cast<double>(r.dense_params)
            << std::setw(10) << 100.0 * r.density << std::setw(13)
            << static_cast<double>(r.dense_macs) / static_cast<double>(r.mac_saten) << "x"
            << std::defaultfloat << "\n";
    }
    if (totals.dense_params > 0) {
        log << std::left << std::setw(32) << "(total)" << std::right << std::fixed
            << std::setprecision(2) << std::setw(10)
            << 100.0 * static_cast<double>(totals.params_tt) /
                   static_cast<double>(totals.dense_params)
            << std::setw(10)
            << 100.0 * static_cast<double>(totals.params_sparse) /
                   static_cast<double>(totals.dense_params)
            << std::setw(13)
            << static_cast<double>(totals.dense_macs) / static_cast<double>(totals.mac_saten)
            << "x" << std::defaultfloat << "\n";
    }
    return 0;
}

int guard(std::ostream& log, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        log << "format error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        log << "i/o error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace saten::cli
