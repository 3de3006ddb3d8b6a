#include "mincil/config.hpp"

#include "mincil/errors.hpp"
#include "mincil/hashing.hpp"
#include "mincil/report.hpp"

#include <fmt/format.h>

#include <charconv>
#include <functional>

namespace mincil {
namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view value) {
    Int out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ValidationError(fmt::format("config key '{}': '{}' is not an integer", key, value));
    }
    return out;
}

double parse_double(std::string_view key, std::string_view value) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ValidationError(fmt::format("config key '{}': '{}' is not a number", key, value));
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1") {
        return true;
    }
    if (value == "false" || value == "0") {
        return false;
    }
    throw ValidationError(fmt::format("config key '{}': '{}' is not a boolean", key, value));
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }
std::string fmt_real(double d) { return fmt::format("{}", d); }

struct Field {
    ConfigKey key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

#define MINCIL_INT_FIELD(name, doc, member, type)                                            \
    Field {                                                                                  \
        {name, doc}, [](const RunConfig& c) { return std::to_string(c.member); },           \
            [](RunConfig& c, std::string_view v) { c.member = parse_int<type>(name, v); }   \
    }
#define MINCIL_REAL_FIELD(name, doc, member)                                           \
    Field {                                                                            \
        {name, doc}, [](const RunConfig& c) { return fmt_real(c.member); },           \
            [](RunConfig& c, std::string_view v) { c.member = parse_double(name, v); } \
    }
#define MINCIL_BOOL_FIELD(name, doc, member)                                         \
    Field {                                                                          \
        {name, doc}, [](const RunConfig& c) { return fmt_bool(c.member); },         \
            [](RunConfig& c, std::string_view v) { c.member = parse_bool(name, v); } \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> kFields = {
        Field{{"data.source", "synthetic | embedding"},
              [](const RunConfig& c) { return c.data_source; },
              [](RunConfig& c, std::string_view v) { c.data_source = std::string(v); }},
        Field{{"data.path", "embedding CSV path (data.source = embedding)"},
              [](const RunConfig& c) { return c.data_path; },
              [](RunConfig& c, std::string_view v) { c.data_path = std::string(v); }},
        MINCIL_INT_FIELD("data.num_classes", "synthetic class count", synthetic.num_classes, int),
        MINCIL_INT_FIELD("data.samples_per_class", "synthetic samples per class (>= 5)", synthetic.samples_per_class, int),
        MINCIL_INT_FIELD("data.dim", "synthetic raw feature width (>= 2)", synthetic.dim, int),
        MINCIL_REAL_FIELD("data.separation", "radius of the synthetic class-mean sphere", synthetic.separation),
        MINCIL_INT_FIELD("data.overlap_classes", "cross-task confusable class pairs", synthetic.overlap_classes, int),
        MINCIL_INT_FIELD("data.tasks", "number of sessions T", synthetic.num_tasks, int),
        MINCIL_INT_FIELD("data.class_seed", "class-order (and synthetic data) seed", class_seed, std::uint64_t),
        MINCIL_INT_FIELD("backbone.blocks", "frozen blocks L", model.backbone.blocks, int),
        MINCIL_INT_FIELD("backbone.d1", "backbone feature width", model.backbone.d1, int),
        MINCIL_REAL_FIELD("backbone.gain", "residual branch gain", model.backbone.gain),
        MINCIL_INT_FIELD("backbone.buffer_size", "random buffer expansion width", model.backbone.buffer_size, int),
        MINCIL_INT_FIELD("backbone.seed", "seed of all frozen parameters", model.seed, std::uint64_t),
        MINCIL_BOOL_FIELD("pinoise.enabled", "insert Pi-Noise layers (false = analytic baseline)", model.pinoise_enabled),
        MINCIL_INT_FIELD("pinoise.d2", "noise generator width", model.d2, int),
        MINCIL_REAL_FIELD("pinoise.tau", "mixture-weight softmax temperature", train.tau),
        Field{{"pinoise.strategy", "learned-omega | average | mu-only | sigma-only | last-task | random-task"},
              [](const RunConfig& c) { return std::string(to_string(c.train.strategy)); },
              [](RunConfig& c, std::string_view v) { c.train.strategy = parse_strategy(v); }},
        MINCIL_BOOL_FIELD("pinoise.shared_omega", "one mixture-weight vector for all layers", train.shared_omega),
        MINCIL_BOOL_FIELD("pinoise.stochastic_eval", "sample noise at evaluation instead of the mean path",
                          train.stochastic_eval),
        MINCIL_BOOL_FIELD("pinoise.stochastic_classifier_update", "sample noise during classifier fits",
                          train.stochastic_classifier_update),
        MINCIL_REAL_FIELD("pinoise.init_scale", "generator weight scale at creation (0 = zero noise)",
                          train.generator_init_scale),
        MINCIL_REAL_FIELD("classifier.lambda", "ridge regularization", model.lambda),
        MINCIL_INT_FIELD("train.epochs", "epochs per session", train.epochs, int),
        MINCIL_INT_FIELD("train.batch_size", "minibatch and classifier-update chunk size", train.batch_size, int),
        MINCIL_REAL_FIELD("train.lr_init", "initial learning rate (cosine decay to 0)", train.lr_init),
        MINCIL_REAL_FIELD("train.momentum", "SGD momentum", train.momentum),
        Field{{"train.loss_mode", "residual-corrected-ce | residual-mse"},
              [](const RunConfig& c) { return std::string(to_string(c.train.loss_mode)); },
              [](RunConfig& c, std::string_view v) { c.train.loss_mode = parse_loss_mode(v); }},
        MINCIL_REAL_FIELD("train.clip", "global gradient-norm clip (0 disables)", train.clip_norm),
        MINCIL_INT_FIELD("train.seed", "training seed (noise draws, epoch order, generator init)", train.seed,
                         std::uint64_t),
        Field{{"output.dir", "artifact directory"},
              [](const RunConfig& c) { return c.output_dir; },
              [](RunConfig& c, std::string_view v) { c.output_dir = std::string(v); }},
    };
    return kFields;
}

#undef MINCIL_INT_FIELD
#undef MINCIL_REAL_FIELD
#undef MINCIL_BOOL_FIELD

void check(bool ok, std::string_view key, std::string_view rule) {
    if (!ok) {
        throw ValidationError(fmt::format("config key '{}' must be {}", key, rule));
    }
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const auto& f : fields()) {
            out.push_back(f.key);
        }
        return out;
    }();
    return keys;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
    for (const auto& f : fields()) {
        if (f.key.name == key) {
            f.set(config, trim(value));
            return;
        }
    }
    throw ValidationError(fmt::format("unknown config key '{}'", key));
}

void apply_config_text(RunConfig& config, std::string_view text) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError(fmt::format("config line {}: expected key = value", line_no));
        }
        apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
    apply_config_text(config, read_text_file(path));
}

void apply_profile(RunConfig& config, std::string_view profile) {
    if (profile == "desk") {
        return;
    }
    if (profile == "paper-dims") {
        config.model.d2 = 192;
        config.model.backbone.buffer_size = 16384;
        return;
    }
    throw ValidationError(fmt::format("unknown profile '{}' (desk | paper-dims)", profile));
}

void validate(const RunConfig& c) {
    check(c.data_source == "synthetic" || c.data_source == "embedding", "data.source", "synthetic or embedding");
    if (c.data_source == "embedding") {
        check(!c.data_path.empty(), "data.path", "set when data.source = embedding");
    }
    const auto& s = c.synthetic;
    check(s.num_tasks >= 1, "data.tasks", ">= 1");
    if (c.data_source == "synthetic") {
        check(s.num_classes >= s.num_tasks, "data.num_classes", ">= data.tasks");
        check(s.samples_per_class >= 5, "data.samples_per_class", ">= 5");
        check(s.dim >= 2, "data.dim", ">= 2");
        check(s.separation >= 0.0, "data.separation", ">= 0");
        check(s.overlap_classes >= 0 && 2 * s.overlap_classes <= s.num_classes, "data.overlap_classes",
              "in [0, num_classes / 2]");
    }
    const auto& b = c.model.backbone;
    check(b.blocks >= 1 && b.blocks <= 64, "backbone.blocks", "in [1, 64]");
    check(b.d1 >= 1 && b.d1 <= 4096, "backbone.d1", "in [1, 4096]");
    check(b.gain >= 0.0 && b.gain <= 10.0, "backbone.gain", "in [0, 10]");
    check(b.buffer_size >= b.d1 && b.buffer_size <= 65536, "backbone.buffer_size", "in [d1, 65536]");
    check(c.model.d2 >= 1 && c.model.d2 <= 4096, "pinoise.d2", "in [1, 4096]");
    check(c.model.lambda > 0.0, "classifier.lambda", "> 0");
    const auto& t = c.train;
    check(t.tau > 0.0, "pinoise.tau", "> 0");
    check(t.generator_init_scale >= 0.0, "pinoise.init_scale", ">= 0");
    check(t.epochs >= 0, "train.epochs", ">= 0");
    check(t.batch_size >= 1, "train.batch_size", ">= 1");
    check(t.lr_init > 0.0, "train.lr_init", "> 0");
    check(t.momentum >= 0.0 && t.momentum < 1.0, "train.momentum", "in [0, 1)");
    check(t.clip_norm >= 0.0, "train.clip", ">= 0");
    check(!c.output_dir.empty(), "output.dir", "non-empty");
}

std::string to_text(const RunConfig& config) {
    std::string out;
    for (const auto& f : fields()) {
        out += f.key.name + " = " + f.get(config) + "\n";
    }
    return out;
}

std::string config_hash(const RunConfig& config) {
    RunConfig copy = config;
    copy.output_dir = "-";
    return sha256_hex(to_text(copy));
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    while (true) {
        const auto comma = text.find(',');
        const auto item = trim(text.substr(0, comma));
        if (!item.empty()) {
            out.emplace_back(item);
        }
        if (comma == std::string_view::npos) {
            break;
        }
        text = text.substr(comma + 1);
    }
    return out;
}

}  // namespace mincil
