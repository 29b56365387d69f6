#include "bimsgc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace bimsgc {

using json = nlohmann::json;

double CondenseConfig::max_rate() const { return scales.empty() ? 0.0 : *std::max_element(scales.begin(), scales.end()); }
double CondenseConfig::min_rate() const { return scales.empty() ? 0.0 : *std::min_element(scales.begin(), scales.end()); }

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) { throw ParameterError(field + ": " + why); }

void positive_int(int v, const char* field, bool allow_zero = true) {
    if (v < 0 || (!allow_zero && v == 0)) bad(field, "must be " + std::string(allow_zero ? "non-negative" : "positive") +
                                                       ", got " + std::to_string(v));
}

}  // namespace

void validate(const CondenseConfig& c) {
    if (c.scales.empty()) bad("scales", "must list at least one rate");
    for (size_t i = 0; i < c.scales.size(); ++i) {
        if (!(c.scales[i] > 0.0 && c.scales[i] <= 1.0)) bad("scales", "every rate must lie in (0, 1]");
        if (i > 0 && !(c.scales[i] > c.scales[i - 1])) bad("scales", "must be strictly ascending");
    }
    if (c.meso_candidates.empty()) bad("meso_candidates", "must list at least one fraction");
    for (double f : c.meso_candidates)
        if (!(f > 0.0 && f <= 1.0)) bad("meso_candidates", "fractions must lie in (0, 1]");
    if (c.alpha < 0 || c.beta_d < 0 || c.gamma < 0) bad("alpha/beta_d/gamma", "loss weights must be non-negative");
    if (!(c.beta_ib >= 0)) bad("beta_ib", "must be non-negative");
    if (!(c.theta > 0.0 && c.theta < 1.0)) {
        std::ostringstream os;
        os << "must lie in (0, 1), got " << c.theta;
        bad("theta", os.str());
    }
    if (!(c.lr > 0)) bad("lr", "must be positive");
    positive_int(c.e1, "e1");
    positive_int(c.e2, "e2");
    positive_int(c.e_down, "e_down");
    positive_int(c.probe_epochs, "probe_epochs");
    if (c.optimizer != "adam" && c.optimizer != "sgd") bad("optimizer", "expected adam or sgd");
    if (c.k_policy != "node_count") bad("k_policy", "only node_count is supported");
    if (c.strategy != "bimsgc" && c.strategy != "recondense" && c.strategy != "large_to_small" &&
        c.strategy != "small_to_large")
        bad("strategy", "expected bimsgc, recondense, large_to_small or small_to_large");
    if (!(c.spectral_tol > 0)) bad("spectral_tol", "must be positive");
    if (c.init_noise < 0) bad("init_noise", "must be non-negative");
    if (!(c.down_lr_scale >= 0)) bad("down_lr_scale", "must be non-negative");
    positive_int(c.per_class_train, "per_class_train", false);
    positive_int(c.n_val, "n_val");
    positive_int(c.n_test, "n_test");
    const EvalConfig& e = c.eval;
    if (e.archs.empty()) bad("eval.archs", "must list at least one architecture");
    for (const auto& a : e.archs)
        if (a != "gcn" && a != "sgc" && a != "mlp" && a != "appnp" && a != "chebnet")
            bad("eval.archs", "unknown architecture '" + a + "'");
    positive_int(e.trials, "eval.trials", false);
    if (e.mode != "ranked" && e.mode != "random") bad("eval.mode", "expected ranked or random");
    positive_int(e.hidden, "eval.hidden", false);
    positive_int(e.depth, "eval.depth", false);
    positive_int(e.epochs, "eval.epochs");
    positive_int(e.patience, "eval.patience", false);
    positive_int(e.full_epochs, "eval.full_epochs");
    if (!(e.lr > 0)) bad("eval.lr", "must be positive");
    if (e.weight_decay < 0) bad("eval.weight_decay", "must be non-negative");
    if (e.cheb_order < 1) bad("eval.cheb_order", "must be at least 1");
}

json to_json(const CondenseConfig& c) {
    json e = {{"archs", c.eval.archs},   {"trials", c.eval.trials},        {"mode", c.eval.mode},
              {"hidden", c.eval.hidden}, {"depth", c.eval.depth},          {"epochs", c.eval.epochs},
              {"patience", c.eval.patience}, {"full_epochs", c.eval.full_epochs}, {"full", c.eval.full},
              {"lr", c.eval.lr},         {"weight_decay", c.eval.weight_decay}, {"cheb_order", c.eval.cheb_order}};
    return json{{"dataset", c.dataset},
                {"scales", c.scales},
                {"meso_candidates", c.meso_candidates},
                {"alpha", c.alpha},
                {"beta_d", c.beta_d},
                {"gamma", c.gamma},
                {"beta_ib", c.beta_ib},
                {"theta", c.theta},
                {"lr", c.lr},
                {"e1", c.e1},
                {"e2", c.e2},
                {"e_down", c.e_down},
                {"probe_epochs", c.probe_epochs},
                {"seed", c.seed},
                {"optimizer", c.optimizer},
                {"k_policy", c.k_policy},
                {"strategy", c.strategy},
                {"spectral_tol", c.spectral_tol},
                {"size_normalized", c.size_normalized},
                {"init_noise", c.init_noise},
                {"init_logit", c.init_logit},
                {"down_lr_scale", c.down_lr_scale},
                {"per_class_train", c.per_class_train},
                {"n_val", c.n_val},
                {"n_test", c.n_test},
                {"eval", e}};
}

namespace {

template <class T>
void take(const json& j, const char* key, T& out, const std::string& prefix) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ParameterError(prefix + key + ": wrong type (" + std::string(j.at(key).type_name()) + ")");
    }
}

void reject_unknown(const json& j, const json& known, const std::string& prefix) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.contains(it.key())) throw ParameterError(prefix + it.key() + ": unknown field");
}

}  // namespace

CondenseConfig config_from_json(const json& j, const std::string& source) {
    if (!j.is_object()) throw ParameterError(source + ": top level must be a JSON object");
    CondenseConfig c;
    const json known = to_json(c);
    reject_unknown(j, known, "");
    take(j, "dataset", c.dataset, "");
    take(j, "scales", c.scales, "");
    take(j, "meso_candidates", c.meso_candidates, "");
    take(j, "alpha", c.alpha, "");
    take(j, "beta_d", c.beta_d, "");
    take(j, "gamma", c.gamma, "");
    take(j, "beta_ib", c.beta_ib, "");
    take(j, "theta", c.theta, "");
    take(j, "lr", c.lr, "");
    take(j, "e1", c.e1, "");
    take(j, "e2", c.e2, "");
    take(j, "e_down", c.e_down, "");
    take(j, "probe_epochs", c.probe_epochs, "");
    take(j, "seed", c.seed, "");
    take(j, "optimizer", c.optimizer, "");
    take(j, "k_policy", c.k_policy, "");
    take(j, "strategy", c.strategy, "");
    take(j, "spectral_tol", c.spectral_tol, "");
    take(j, "size_normalized", c.size_normalized, "");
    take(j, "init_noise", c.init_noise, "");
    take(j, "init_logit", c.init_logit, "");
    take(j, "down_lr_scale", c.down_lr_scale, "");
    take(j, "per_class_train", c.per_class_train, "");
    take(j, "n_val", c.n_val, "");
    take(j, "n_test", c.n_test, "");
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        if (!e.is_object()) throw ParameterError("eval: must be an object");
        reject_unknown(e, known.at("eval"), "eval.");
        take(e, "archs", c.eval.archs, "eval.");
        take(e, "trials", c.eval.trials, "eval.");
        take(e, "mode", c.eval.mode, "eval.");
        take(e, "hidden", c.eval.hidden, "eval.");
        take(e, "depth", c.eval.depth, "eval.");
        take(e, "epochs", c.eval.epochs, "eval.");
        take(e, "patience", c.eval.patience, "eval.");
        take(e, "full_epochs", c.eval.full_epochs, "eval.");
        take(e, "full", c.eval.full, "eval.");
        take(e, "lr", c.eval.lr, "eval.");
        take(e, "weight_decay", c.eval.weight_decay, "eval.");
        take(e, "cheb_order", c.eval.cheb_order, "eval.");
    }
    return c;
}

CondenseConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open config " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        size_t upto = std::min(text.size(), e.byte > 0 ? static_cast<size_t>(e.byte - 1) : size_t{0});
        size_t line = 1 + static_cast<size_t>(std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n'));
        size_t nl = text.rfind('\n', upto == 0 ? 0 : upto - 1);
        size_t col = nl == std::string::npos ? upto + 1 : upto - nl;
        throw ParameterError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) +
                             ": JSON syntax error");
    }
    CondenseConfig c;
    try {
        c = config_from_json(j, path.string());
        validate(c);
    } catch (const ParameterError& e) {
        throw ParameterError(path.string() + ": " + e.what());
    }
    return c;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::string config_digest(const CondenseConfig& cfg) {
    json j = to_json(cfg);
    j.erase("dataset");
    j.erase("eval");
    return fnv1a_hex(j.dump());
}

}  // namespace bimsgc
