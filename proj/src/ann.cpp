#include "hra/ann.hpp"

#include "hra/error.hpp"
#include "hra/format.hpp"
#include "text.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <variant>

namespace hra::ann {

namespace {

double logistic(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

// Improvement is measured across this many epochs for the stopping rule.
constexpr int kPatienceWindow = 100;

}  // namespace

Topology Topology::for_inputs(std::size_t n_inputs, std::optional<std::size_t> n_hidden) {
    if (n_inputs < 1) throw InputError("topology needs at least one input");
    const std::size_t hidden = n_hidden.value_or(n_inputs);
    if (hidden < 1) throw InputError("topology needs at least one hidden node");
    return Topology{n_inputs, hidden};
}

WeightSet WeightSet::zeros(const Topology& t) {
    WeightSet w;
    w.topology = t;
    w.hidden_weights.assign(t.n_hidden * t.n_inputs, 0.0);
    w.hidden_bias.assign(t.n_hidden, 0.0);
    w.output_weights.assign(t.n_hidden, 0.0);
    return w;
}

std::size_t WeightSet::parameter_count() const noexcept {
    return hidden_weights.size() + hidden_bias.size() + output_weights.size() + 1;
}

std::vector<double> WeightSet::flatten() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    p.insert(p.end(), hidden_weights.begin(), hidden_weights.end());
    p.insert(p.end(), hidden_bias.begin(), hidden_bias.end());
    p.insert(p.end(), output_weights.begin(), output_weights.end());
    p.push_back(output_bias);
    return p;
}

WeightSet WeightSet::unflatten(const Topology& t, std::span<const double> p) {
    WeightSet w = zeros(t);
    if (p.size() != w.parameter_count()) throw InputError("parameter vector does not match topology");
    auto it = p.begin();
    std::copy_n(it, w.hidden_weights.size(), w.hidden_weights.begin());
    it += static_cast<std::ptrdiff_t>(w.hidden_weights.size());
    std::copy_n(it, w.hidden_bias.size(), w.hidden_bias.begin());
    it += static_cast<std::ptrdiff_t>(w.hidden_bias.size());
    std::copy_n(it, w.output_weights.size(), w.output_weights.begin());
    it += static_cast<std::ptrdiff_t>(w.output_weights.size());
    w.output_bias = *it;
    for (double v : p) {
        if (!std::isfinite(v)) throw InputError("non-finite network parameter");
    }
    return w;
}

void TrainingConfig::validate() const {
    if (max_epochs < 1) throw InputError("epochs must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InputError("learning_rate must be positive");
    if (!(loss_tolerance > 0.0) || !std::isfinite(loss_tolerance)) throw InputError("tolerance must be positive");
    if (n_replications < 1) throw InputError("replications must be >= 1");
    if (hidden_nodes && *hidden_nodes < 1) throw InputError("hidden_nodes must be >= 1");
}

TrainingConfig load_training_config(std::istream& in) {
    TrainingConfig config;
    detail::LineReader reader(in);
    std::string line;
    while (reader.next(line)) {
        const auto content = detail::trim(line);
        if (content.empty() || content.front() == '#') continue;
        const auto eq = content.find('=');
        const auto where = "training config line " + std::to_string(reader.line_number());
        if (eq == std::string_view::npos) throw InputError(where + ": expected key=value");
        const std::string key(detail::trim(content.substr(0, eq)));
        const std::string value(detail::trim(content.substr(eq + 1)));
        auto as_int = [&]() {
            auto v = detail::parse_int(value);
            if (!v) throw InputError(where + ": '" + key + "' needs an integer");
            return *v;
        };
        auto as_double = [&]() {
            auto v = detail::parse_double(value);
            if (!v) throw InputError(where + ": '" + key + "' needs a number");
            return *v;
        };
        if (key == "seed") {
            const auto v = as_int();
            if (v < 0) throw InputError(where + ": seed must be non-negative");
            config.seed = static_cast<std::uint64_t>(v);
        } else if (key == "epochs") {
            config.max_epochs = static_cast<int>(as_int());
        } else if (key == "learning_rate") {
            config.learning_rate = as_double();
        } else if (key == "tolerance") {
            config.loss_tolerance = as_double();
        } else if (key == "replications") {
            config.n_replications = static_cast<int>(as_int());
        } else if (key == "hidden_nodes") {
            const auto v = as_int();
            if (v < 1) throw InputError(where + ": hidden_nodes must be >= 1");
            config.hidden_nodes = static_cast<std::size_t>(v);
        } else {
            throw InputError(where + ": unknown key '" + key + "'");
        }
    }
    config.validate();
    return config;
}

WeightSet init_weights(const Topology& topology, std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    // Explicit bit mapping rather than uniform_real_distribution so the stream
    // is identical across standard libraries.
    auto draw = [&engine]() { return static_cast<double>(engine() >> 11) * 0x1.0p-53 - 0.5; };
    WeightSet w = WeightSet::zeros(topology);
    for (double& v : w.hidden_weights) v = draw();
    for (double& v : w.hidden_bias) v = draw();
    for (double& v : w.output_weights) v = draw();
    w.output_bias = draw();
    return w;
}

double forward(const WeightSet& w, std::span<const double> x) {
    const auto& t = w.topology;
    if (x.size() != t.n_inputs)
        throw InputError("input has " + std::to_string(x.size()) + " components, network expects " +
                         std::to_string(t.n_inputs));
    double z_out = w.output_bias;
    for (std::size_t h = 0; h < t.n_hidden; ++h) {
        double z = w.hidden_bias[h];
        const double* row = &w.hidden_weights[h * t.n_inputs];
        for (std::size_t i = 0; i < t.n_inputs; ++i) z += row[i] * x[i];
        z_out += w.output_weights[h] * logistic(z);
    }
    return logistic(z_out);
}

namespace {

void check_data(const WeightSet& w, const TrainingData& data) {
    if (data.inputs.size() != data.targets.size()) throw InputError("inputs and targets differ in length");
    if (data.targets.empty()) throw InputError("training data is empty");
    for (const auto& row : data.inputs) {
        if (row.size() != w.topology.n_inputs) throw InputError("training row width does not match topology");
    }
}

}  // namespace

LossGradient loss_and_gradient(const WeightSet& w, const TrainingData& data) {
    check_data(w, data);
    const auto& t = w.topology;
    const double n = static_cast<double>(data.size());

    LossGradient out;
    out.gradient.assign(w.parameter_count(), 0.0);
    double* g_hidden_w = out.gradient.data();
    double* g_hidden_b = g_hidden_w + w.hidden_weights.size();
    double* g_out_w = g_hidden_b + w.hidden_bias.size();
    double* g_out_b = g_out_w + w.output_weights.size();

    std::vector<double> hidden(t.n_hidden);
    for (std::size_t r = 0; r < data.size(); ++r) {
        const auto& x = data.inputs[r];
        double z_out = w.output_bias;
        for (std::size_t h = 0; h < t.n_hidden; ++h) {
            double z = w.hidden_bias[h];
            const double* row = &w.hidden_weights[h * t.n_inputs];
            for (std::size_t i = 0; i < t.n_inputs; ++i) z += row[i] * x[i];
            hidden[h] = logistic(z);
            z_out += w.output_weights[h] * hidden[h];
        }
        const double y = logistic(z_out);
        const double err = y - data.targets[r];
        out.loss += err * err;

        // d(err^2 / n)/dz_out
        const double delta_out = 2.0 * err * y * (1.0 - y) / n;
        *g_out_b += delta_out;
        for (std::size_t h = 0; h < t.n_hidden; ++h) {
            g_out_w[h] += delta_out * hidden[h];
            const double delta_h = delta_out * w.output_weights[h] * hidden[h] * (1.0 - hidden[h]);
            g_hidden_b[h] += delta_h;
            double* grow = g_hidden_w + h * t.n_inputs;
            for (std::size_t i = 0; i < t.n_inputs; ++i) grow[i] += delta_h * x[i];
        }
    }
    out.loss /= n;
    return out;
}

double loss(const WeightSet& w, const TrainingData& data) {
    check_data(w, data);
    double sum = 0.0;
    for (std::size_t r = 0; r < data.size(); ++r) {
        const double err = forward(w, data.inputs[r]) - data.targets[r];
        sum += err * err;
    }
    return sum / static_cast<double>(data.size());
}

TrainingRun train_one(const TrainingData& data, const Topology& topology, const TrainingConfig& config,
                      std::uint64_t seed) {
    config.validate();
    for (double target : data.targets) {
        if (!(target > 0.0 && target < 1.0)) throw InputError("training targets must lie in (0, 1)");
    }

    TrainingRun run;
    run.weights = init_weights(topology, seed);
    auto& w = run.weights;
    run.loss_trace.reserve(static_cast<std::size_t>(config.max_epochs) + 1);

    // Applies `step` to every parameter in flatten() order.
    auto update = [&](const std::vector<double>& grad) {
        std::size_t k = 0;
        bool finite = true;
        auto apply = [&](double& v) {
            v -= config.learning_rate * grad[k++];
            finite = finite && std::isfinite(v);
        };
        for (double& v : w.hidden_weights) apply(v);
        for (double& v : w.hidden_bias) apply(v);
        for (double& v : w.output_weights) apply(v);
        apply(w.output_bias);
        return finite;
    };

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        const auto lg = loss_and_gradient(w, data);
        if (!std::isfinite(lg.loss)) throw TrainingDiverged(seed, epoch);
        run.loss_trace.push_back(lg.loss);
        if (epoch >= kPatienceWindow) {
            const double improvement = run.loss_trace[static_cast<std::size_t>(epoch - kPatienceWindow)] - lg.loss;
            if (improvement < config.loss_tolerance) {
                run.loss_trace.pop_back();  // re-added below as the final loss
                break;
            }
        }
        if (!update(lg.gradient)) throw TrainingDiverged(seed, epoch);
        run.epochs = epoch + 1;
    }
    const double final_loss = loss(run.weights, data);
    if (!std::isfinite(final_loss)) throw TrainingDiverged(seed, run.epochs);
    run.loss_trace.push_back(final_loss);
    return run;
}

// ---------------------------------------------------------------------------

TrainedPredictor::TrainedPredictor(Topology topology, std::vector<EnsembleMember> members,
                                   std::vector<PsfId> active_psfs, PsfVector maxima,
                                   std::vector<std::uint64_t> dropped_seeds)
    : topology_(topology), members_(std::move(members)), active_psfs_(std::move(active_psfs)),
      maxima_(maxima), dropped_seeds_(std::move(dropped_seeds)) {
    if (members_.empty()) throw InputError("predictor ensemble is empty");
    if (active_psfs_.size() != topology_.n_inputs)
        throw InputError("active PSF count does not match the network input width");
    for (const auto& m : members_) {
        if (!(m.weights.topology == topology_)) throw InputError("ensemble member topology mismatch");
    }
}

double TrainedPredictor::predict_normalized(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto& m : members_) sum += forward(m.weights, x);
    return sum / static_cast<double>(members_.size());
}

std::vector<double> TrainedPredictor::encode(const PsfVector& raw) const {
    const auto normalized = normalize_with(raw, maxima_);
    std::vector<double> x;
    x.reserve(active_psfs_.size());
    for (PsfId id : active_psfs_) x.push_back(normalized[id]);
    return x;
}

double TrainedPredictor::predict(const PsfVector& raw) const { return predict_normalized(encode(raw)); }

PreparedData prepare(std::span<const PsfVector> psfs, std::span<const double> heps,
                     std::span<const PsfId> active_psfs) {
    if (psfs.size() != heps.size()) throw InputError("PSF rows and HEP values differ in length");
    if (active_psfs.empty()) throw InputError("no active PSFs");
    const auto norm = normalize(psfs);
    PreparedData out{{}, norm.maxima};
    for (std::size_t r = 0; r < psfs.size(); ++r) {
        std::vector<double> row;
        row.reserve(active_psfs.size());
        for (PsfId id : active_psfs) row.push_back(norm.normalized[r][id]);
        out.data.inputs.push_back(std::move(row));
        out.data.targets.push_back(heps[r]);
    }
    return out;
}

TrainedPredictor train_replicated(const TrainingData& data, const Topology& topology, const TrainingConfig& config,
                                  std::vector<PsfId> active_psfs, PsfVector maxima) {
    config.validate();
    const auto n = static_cast<std::size_t>(config.n_replications);
    std::vector<std::optional<EnsembleMember>> slots(n);
    std::vector<std::exception_ptr> errors(n);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t k = next++; k < n; k = next++) {
            const std::uint64_t seed = config.seed + k;
            try {
                auto run = train_one(data, topology, config, seed);
                slots[k] = EnsembleMember{seed, std::move(run.weights), run.final_loss()};
            } catch (const TrainingDiverged&) {
                // dropped; recorded below
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };

    unsigned threads = config.threads != 0 ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::vector<EnsembleMember> members;
    std::vector<std::uint64_t> dropped;
    for (std::size_t k = 0; k < n; ++k) {
        if (slots[k]) {
            members.push_back(std::move(*slots[k]));
        } else {
            dropped.push_back(config.seed + k);
        }
    }
    if (members.empty()) throw NumericalError("every training replication diverged");
    return TrainedPredictor(topology, std::move(members), std::move(active_psfs), maxima, std::move(dropped));
}

HoldoutSplit split_holdout(std::size_t n_rows, double holdout_fraction, std::uint64_t seed) {
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) throw InputError("holdout fraction must be in [0, 1)");
    std::vector<std::size_t> order(n_rows);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 engine(seed);
    // Fisher-Yates with an explicit bounded draw, portable across libraries.
    for (std::size_t i = n_rows; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(engine() % i);
        std::swap(order[i - 1], order[j]);
    }
    const auto n_holdout = static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(n_rows)));
    HoldoutSplit split;
    split.holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_holdout));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_holdout), order.end());
    std::sort(split.holdout.begin(), split.holdout.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

TrainingData subset(const TrainingData& data, std::span<const std::size_t> rows) {
    TrainingData out;
    for (std::size_t r : rows) {
        out.inputs.push_back(data.inputs.at(r));
        out.targets.push_back(data.targets.at(r));
    }
    return out;
}

MetricReport metrics(std::span<const double> predicted, std::span<const double> observed) {
    if (predicted.size() != observed.size()) throw InputError("predicted and observed differ in length");
    if (observed.empty()) throw InputError("metrics need at least one value");
    MetricReport report;
    const double n = static_cast<double>(observed.size());
    double sse = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double d = predicted[i] - observed[i];
        report.squared_errors.push_back(d * d);
        sse += d * d;
    }
    report.mse = sse / n;
    const double mean = std::accumulate(observed.begin(), observed.end(), 0.0) / n;
    double sst = 0.0;
    for (double y : observed) sst += (y - mean) * (y - mean);
    if (sst > 0.0) report.r_squared = 1.0 - sse / sst;
    return report;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kMagic = "hra-predictor";
constexpr int kFormatVersion = 1;

void write_row(std::ostream& out, std::string_view tag, std::span<const double> values, double bias) {
    out << tag;
    for (double v : values) out << ' ' << format_full(v);
    out << ' ' << format_full(bias) << '\n';
}

class TokenLine {
public:
    TokenLine(std::istream& in, std::string_view expected_tag) {
        std::string line;
        if (!std::getline(in, line)) throw InputError("predictor file truncated; expected '" + std::string(expected_tag) + "'");
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag != expected_tag) throw InputError("predictor file: expected '" + std::string(expected_tag) + "', found '" + tag + "'");
        std::string tok;
        while (ss >> tok) tokens_.push_back(tok);
    }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    std::size_t size() const noexcept { return tokens_.size(); }
    double number(std::size_t i) const {
        auto v = detail::parse_double(tokens_.at(i));
        if (!v) throw InputError("predictor file: bad number '" + tokens_.at(i) + "'");
        return *v;
    }
    std::uint64_t integer(std::size_t i) const {
        auto v = detail::parse_int(tokens_.at(i));
        if (!v || *v < 0) throw InputError("predictor file: bad integer '" + tokens_.at(i) + "'");
        return static_cast<std::uint64_t>(*v);
    }

private:
    std::vector<std::string> tokens_;
};

}  // namespace

void save_predictor(const TrainedPredictor& p, std::ostream& out) {
    const auto& t = p.topology();
    out << kMagic << ' ' << kFormatVersion << '\n';
    out << "topology " << t.n_inputs << ' ' << t.n_hidden << ' ' << Topology::n_outputs << '\n';
    out << "active " << psf_letters(p.active_psfs()) << '\n';
    out << "maxima";
    for (double v : p.maxima().values()) out << ' ' << format_full(v);
    out << '\n';
    out << "dropped " << p.dropped_seeds().size();
    for (auto s : p.dropped_seeds()) out << ' ' << s;
    out << '\n';
    out << "members " << p.members().size() << '\n';
    for (const auto& m : p.members()) {
        out << "member " << m.seed << ' ' << format_full(m.final_loss) << '\n';
        for (std::size_t h = 0; h < t.n_hidden; ++h) {
            write_row(out, "hidden", std::span(m.weights.hidden_weights).subspan(h * t.n_inputs, t.n_inputs),
                      m.weights.hidden_bias[h]);
        }
        write_row(out, "output", m.weights.output_weights, m.weights.output_bias);
    }
    if (!out) throw InputError("failed writing predictor");
}

TrainedPredictor load_predictor(std::istream& in) {
    TokenLine magic(in, kMagic);
    if (magic.size() != 1 || magic.integer(0) != kFormatVersion)
        throw InputError("unsupported predictor format version");
    TokenLine topo(in, "topology");
    if (topo.size() != 3 || topo.integer(2) != 1) throw InputError("predictor file: bad topology line");
    const auto topology = Topology::for_inputs(topo.integer(0), topo.integer(1));
    TokenLine active_line(in, "active");
    if (active_line.size() != 1) throw InputError("predictor file: bad active line");
    auto active = parse_psf_letters(active_line.tokens()[0]);
    TokenLine maxima_line(in, "maxima");
    if (maxima_line.size() != kPsfCount) throw InputError("predictor file: bad maxima line");
    std::array<double, kPsfCount> maxima{};
    for (std::size_t j = 0; j < kPsfCount; ++j) maxima[j] = maxima_line.number(j);
    TokenLine dropped_line(in, "dropped");
    if (dropped_line.size() < 1 || dropped_line.size() != dropped_line.integer(0) + 1)
        throw InputError("predictor file: bad dropped line");
    std::vector<std::uint64_t> dropped;
    for (std::size_t i = 1; i < dropped_line.size(); ++i) dropped.push_back(dropped_line.integer(i));
    TokenLine members_line(in, "members");
    if (members_line.size() != 1) throw InputError("predictor file: bad members line");

    std::vector<EnsembleMember> members;
    const auto n_members = members_line.integer(0);
    for (std::uint64_t k = 0; k < n_members; ++k) {
        TokenLine head(in, "member");
        if (head.size() != 2) throw InputError("predictor file: bad member line");
        EnsembleMember m{head.integer(0), WeightSet::zeros(topology), head.number(1)};
        for (std::size_t h = 0; h < topology.n_hidden; ++h) {
            TokenLine row(in, "hidden");
            if (row.size() != topology.n_inputs + 1) throw InputError("predictor file: bad hidden row");
            for (std::size_t i = 0; i < topology.n_inputs; ++i) m.weights.hidden_weights[h * topology.n_inputs + i] = row.number(i);
            m.weights.hidden_bias[h] = row.number(topology.n_inputs);
        }
        TokenLine out_row(in, "output");
        if (out_row.size() != topology.n_hidden + 1) throw InputError("predictor file: bad output row");
        for (std::size_t h = 0; h < topology.n_hidden; ++h) m.weights.output_weights[h] = out_row.number(h);
        m.weights.output_bias = out_row.number(topology.n_hidden);
        members.push_back(std::move(m));
    }
    return TrainedPredictor(topology, std::move(members), std::move(active), PsfVector(maxima), std::move(dropped));
}

}  // namespace hra::ann
