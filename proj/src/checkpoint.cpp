#include "mincil/checkpoint.hpp"

#include "mincil/errors.hpp"
#include "mincil/hashing.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace mincil {
namespace {

constexpr char kMagic[8] = {'M', 'I', 'N', 'C', 'K', 'P', 'T', '\0'};
constexpr std::size_t kNameBytes = 16;
constexpr std::size_t kHeaderBytes = 8 + 8 + 8;
constexpr std::size_t kEntryBytes = kNameBytes + 8 + 8 + 4 + 4;

class Writer {
public:
    void u64(std::uint64_t v) { put_u64(buf_, v); }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { put_f64(buf_, v); }
    void text(const std::string& s) {
        u64(s.size());
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    template <typename M>
    void matrix(const M& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                f64(m(i, j));
            }
        }
    }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size, std::string section)
        : data_(data), size_(size), section_(std::move(section)) {}

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos_ += 8;
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string text() {
        const auto n = count(1);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    Matrix matrix() {
        const auto rows = u64();
        const auto cols = u64();
        if (rows > (1u << 20) || cols > (1u << 20) || rows * cols * 8 > size_ - pos_) {
            throw ValidationError("checkpoint section '" + section_ + "': matrix size out of range");
        }
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                m(i, j) = f64();
            }
        }
        return m;
    }
    /// Element count whose payload must still fit in the section.
    std::size_t count(std::size_t bytes_each) {
        const auto n = u64();
        if (n > (size_ - pos_) / std::max<std::size_t>(bytes_each, 1)) {
            throw ValidationError("checkpoint section '" + section_ + "': count out of range");
        }
        return static_cast<std::size_t>(n);
    }
    void finish() const {
        if (pos_ != size_) {
            throw ValidationError("checkpoint section '" + section_ + "': trailing bytes");
        }
    }

private:
    void need(std::size_t n) const {
        if (size_ - pos_ < n) {
            throw ValidationError("checkpoint section '" + section_ + "': truncated");
        }
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::string section_;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t size) {
    return static_cast<std::uint32_t>(crc32(0L, data, static_cast<uInt>(size)));
}

RowVector as_row(const Matrix& m) {
    if (m.rows() != 1) {
        throw ValidationError("checkpoint: expected a row vector");
    }
    return m.row(0);
}

Vector as_column(const Matrix& m) {
    if (m.cols() != 1 && m.size() != 0) {
        throw ValidationError("checkpoint: expected a column vector");
    }
    return m.size() == 0 ? Vector() : Vector(m.col(0));
}

std::vector<std::uint8_t> encode_meta(const RunConfig& config, const MinModel& model) {
    Writer w;
    w.text(config_hash(config));
    w.text(frozen_parameter_hash(model.backbone, model.buffer));
    w.text(projection_hash(model));
    w.u64(static_cast<std::uint64_t>(model.backbone.d_raw()));
    w.u64(static_cast<std::uint64_t>(model.sessions_completed));
    // Session rng streams are derived from (train seed, task index), so the
    // next task index is the full cursor.
    w.u64(config.train.seed);
    w.u64(static_cast<std::uint64_t>(model.sessions_completed + 1));
    return w.take();
}

std::vector<std::uint8_t> encode_layers(const MinModel& model) {
    Writer w;
    w.u64(model.layers.size());
    for (const auto& layer : model.layers) {
        w.u64(static_cast<std::uint64_t>(layer.layer_index));
        w.u64(layer.generators.size());
        for (const auto& gen : layer.generators) {
            w.i64(gen.task_index);
            w.u64(gen.frozen ? 1 : 0);
            w.matrix(gen.mu.weight);
            w.matrix(gen.mu.bias);
            w.matrix(gen.sigma.weight);
            w.matrix(gen.sigma.bias);
        }
        w.u64(layer.prototypes.size());
        for (const auto& p : layer.prototypes) {
            w.matrix(p);
        }
        w.matrix(layer.omega);
    }
    return w.take();
}

std::vector<std::uint8_t> encode_classifier(const AnalyticClassifier& c) {
    Writer w;
    w.f64(c.lambda());
    w.u64(c.classes_seen().size());
    for (int cls : c.classes_seen()) {
        w.i64(cls);
    }
    w.matrix(c.weights());
    w.matrix(c.autocorrelation());
    return w.take();
}

std::vector<std::uint8_t> encode_reports(const std::vector<SessionReport>& reports) {
    Writer w;
    w.u64(reports.size());
    for (const auto& r : reports) {
        w.i64(r.task_index);
        w.f64(r.accuracy_seen);
        w.i64(r.test_samples);
        w.u64(r.per_class_accuracy.size());
        for (const auto& [cls, acc] : r.per_class_accuracy) {
            w.i64(cls);
            w.f64(acc);
        }
        w.u64(r.epoch_losses.size());
        for (double l : r.epoch_losses) {
            w.f64(l);
        }
    }
    return w.take();
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const RunConfig& config, const MinModel& model,
                                            const std::vector<SessionReport>& reports) {
    const std::string cfg_text = to_text(config);
    const std::vector<std::pair<std::string, std::vector<std::uint8_t>>> sections = {
        {"meta", encode_meta(config, model)},
        {"config", std::vector<std::uint8_t>(cfg_text.begin(), cfg_text.end())},
        {"pinoise", encode_layers(model)},
        {"classifier", encode_classifier(model.classifier)},
        {"reports", encode_reports(reports)},
    };
    std::vector<std::uint8_t> out(kMagic, kMagic + 8);
    put_u64(out, kCheckpointVersion);
    put_u64(out, sections.size());
    std::uint64_t offset = kHeaderBytes + kEntryBytes * sections.size();
    for (const auto& [name, payload] : sections) {
        char padded[kNameBytes] = {};
        std::memcpy(padded, name.data(), std::min(name.size(), kNameBytes));
        out.insert(out.end(), padded, padded + kNameBytes);
        put_u64(out, offset);
        put_u64(out, payload.size());
        const std::uint32_t crc = crc_of(payload.data(), payload.size());
        for (int i = 0; i < 4; ++i) {
            out.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
        }
        out.insert(out.end(), 4, 0);
        offset += payload.size();
    }
    for (const auto& [name, payload] : sections) {
        out.insert(out.end(), payload.begin(), payload.end());
    }
    return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw ValidationError("not a checkpoint file (bad magic)");
    }
    Reader header(bytes.data() + 8, 16, "header");
    const auto version = header.u64();
    if (version != kCheckpointVersion) {
        throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = header.u64();
    if (count > 64 || bytes.size() < kHeaderBytes + count * kEntryBytes) {
        throw ValidationError("checkpoint section table truncated");
    }
    std::map<std::string, std::pair<const std::uint8_t*, std::size_t>> sections;
    for (std::uint64_t s = 0; s < count; ++s) {
        const std::uint8_t* entry = bytes.data() + kHeaderBytes + s * kEntryBytes;
        std::string name(reinterpret_cast<const char*>(entry), kNameBytes);
        name.erase(name.find('\0') == std::string::npos ? name.size() : name.find('\0'));
        Reader fields(entry + kNameBytes, 20, "table");
        const auto offset = fields.u64();
        const auto length = fields.u64();
        std::uint32_t crc = 0;
        for (int i = 0; i < 4; ++i) {
            crc |= static_cast<std::uint32_t>(entry[kNameBytes + 16 + static_cast<std::size_t>(i)]) << (8 * i);
        }
        if (offset > bytes.size() || length > bytes.size() - offset) {
            throw ValidationError("checkpoint section '" + name + "' lies outside the file");
        }
        if (crc_of(bytes.data() + offset, length) != crc) {
            throw ValidationError("checkpoint section '" + name + "' failed its checksum");
        }
        sections[name] = {bytes.data() + offset, length};
    }
    auto section = [&](const std::string& name) {
        const auto it = sections.find(name);
        if (it == sections.end()) {
            throw ValidationError("checkpoint is missing section '" + name + "'");
        }
        return Reader(it->second.first, it->second.second, name);
    };

    Checkpoint ckpt;
    const auto cfg = sections.find("config");
    if (cfg == sections.end()) {
        throw ValidationError("checkpoint is missing section 'config'");
    }
    apply_config_text(ckpt.config,
                      std::string_view(reinterpret_cast<const char*>(cfg->second.first), cfg->second.second));
    validate(ckpt.config);

    Reader meta = section("meta");
    const std::string stored_config_hash = meta.text();
    const std::string stored_backbone_hash = meta.text();
    const std::string stored_projection_hash = meta.text();
    const auto d_raw = static_cast<int>(meta.u64());
    const auto sessions = static_cast<int>(meta.u64());
    const auto train_seed = meta.u64();
    const auto next_session = meta.u64();
    meta.finish();
    if (stored_config_hash != config_hash(ckpt.config)) {
        throw ValidationError("checkpoint config hash does not match its embedded config");
    }
    if (train_seed != ckpt.config.train.seed || next_session != static_cast<std::uint64_t>(sessions) + 1) {
        throw ValidationError("checkpoint rng cursor is inconsistent");
    }

    ckpt.model = make_model(d_raw, ckpt.config.model);
    if (frozen_parameter_hash(ckpt.model.backbone, ckpt.model.buffer) != stored_backbone_hash ||
        projection_hash(ckpt.model) != stored_projection_hash) {
        throw ValidationError("rebuilt frozen parameters do not match the checkpoint hashes");
    }
    ckpt.model.sessions_completed = sessions;

    Reader layers = section("pinoise");
    const auto layer_count = layers.count(8);
    if (layer_count != ckpt.model.layers.size()) {
        throw ValidationError("checkpoint layer count does not match the config");
    }
    for (auto& layer : ckpt.model.layers) {
        if (static_cast<int>(layers.u64()) != layer.layer_index) {
            throw ValidationError("checkpoint layer order mismatch");
        }
        const auto gens = layers.count(8);
        for (std::size_t g = 0; g < gens; ++g) {
            NoiseGenerator gen;
            gen.task_index = static_cast<int>(layers.i64());
            gen.frozen = layers.u64() != 0;
            gen.mu.weight = layers.matrix();
            gen.mu.bias = as_row(layers.matrix());
            gen.sigma.weight = layers.matrix();
            gen.sigma.bias = as_row(layers.matrix());
            for (const Matrix* m : {&gen.mu.weight, &gen.sigma.weight}) {
                require_shape(*m, layer.d2(), layer.d2(), "stored generator weight");
            }
            layer.generators.push_back(std::move(gen));
        }
        const auto protos = layers.count(8);
        for (std::size_t p = 0; p < protos; ++p) {
            layer.prototypes.push_back(as_column(layers.matrix()));
        }
        layer.omega = as_column(layers.matrix());
        if (layer.prototypes.size() != layer.generators.size() ||
            static_cast<std::size_t>(layer.omega.size()) != layer.generators.size() ||
            static_cast<int>(layer.generators.size()) != sessions) {
            throw ValidationError("checkpoint layer state is inconsistent with sessions completed");
        }
    }
    layers.finish();

    Reader cls = section("classifier");
    const double lambda = cls.f64();
    const auto class_count = cls.count(8);
    std::vector<int> classes;
    for (std::size_t i = 0; i < class_count; ++i) {
        classes.push_back(static_cast<int>(cls.i64()));
    }
    Matrix w = cls.matrix();
    Matrix r = cls.matrix();
    cls.finish();
    ckpt.model.classifier = AnalyticClassifier::from_parts(std::move(w), std::move(r), lambda, std::move(classes));

    Reader rep = section("reports");
    const auto report_count = rep.count(8);
    for (std::size_t i = 0; i < report_count; ++i) {
        SessionReport sr;
        sr.task_index = static_cast<int>(rep.i64());
        sr.accuracy_seen = rep.f64();
        sr.test_samples = static_cast<int>(rep.i64());
        const auto per_class = rep.count(16);
        for (std::size_t k = 0; k < per_class; ++k) {
            const int c = static_cast<int>(rep.i64());
            sr.per_class_accuracy[c] = rep.f64();
        }
        const auto losses = rep.count(8);
        for (std::size_t k = 0; k < losses; ++k) {
            sr.epoch_losses.push_back(rep.f64());
        }
        ckpt.reports.push_back(std::move(sr));
    }
    rep.finish();
    if (static_cast<int>(ckpt.reports.size()) != sessions) {
        throw ValidationError("checkpoint report count does not match sessions completed");
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, const MinModel& model,
                     const std::vector<SessionReport>& reports) {
    const auto bytes = encode_checkpoint(config, model, reports);
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("cannot write checkpoint " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace mincil
