#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "painscope/errors.hpp"
#include "painscope/model.hpp"

namespace painscope {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

class ByteWriter {
public:
    template <class T>
    void put(T v) {
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
    }
    void put_string(const std::string& s) {
        put(static_cast<std::uint32_t>(s.size()));
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }
    void put_raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
    std::vector<unsigned char> take() { return std::move(bytes_); }

private:
    std::vector<unsigned char> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

    template <class T>
    T get(const std::string& field) {
        need(sizeof(T), field);
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string(const std::string& field) {
        const auto n = get<std::uint32_t>(field + ".length");
        need(n, field);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    void need(std::size_t n, const std::string& field) const {
        if (bytes_.size() - pos_ < n) {
            throw FormatError(field, "checkpoint truncated");
        }
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck) {
    ByteWriter w;
    w.put_raw(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.put(kCheckpointVersion);
    w.put_string(ck.model.config().to_text());
    w.put(static_cast<std::uint32_t>(ck.epoch));
    w.put(ck.test_loss);
    w.put(static_cast<std::uint32_t>(ck.metadata.size()));
    for (const auto& [k, v] : ck.metadata) {
        w.put_string(k);
        w.put_string(v);
    }
    const auto& params = ck.model.parameters();
    w.put(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        w.put_string(p.name);
        w.put(static_cast<std::uint32_t>(p.tensor.rank()));
        for (auto d : p.tensor.shape()) {
            w.put(static_cast<std::uint32_t>(d));
        }
        w.put(static_cast<std::uint64_t>(p.tensor.size()));
        for (double v : p.tensor.values()) {
            w.put(static_cast<float>(v));
        }
    }
    return w.take();
}

Checkpoint deserialize_checkpoint(const std::vector<unsigned char>& bytes) {
    ByteReader r(bytes);
    r.need(sizeof(kCheckpointMagic), "magic");
    if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw FormatError("magic", "not a painscope checkpoint");
    }
    for (std::size_t i = 0; i < sizeof(kCheckpointMagic); ++i) {
        r.get<char>("magic");
    }
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw FormatError("version", "unsupported checkpoint version " + std::to_string(version));
    }
    ModelConfig config;
    try {
        config = ModelConfig::from_text(r.get_string("config"));
        config.validate();
    } catch (const ConfigError& e) {
        throw FormatError("config", e.what());
    }

    Checkpoint ck;
    ck.epoch = static_cast<int>(r.get<std::uint32_t>("epoch"));
    ck.test_loss = r.get<double>("test_loss");
    const auto meta_count = r.get<std::uint32_t>("metadata.count");
    for (std::uint32_t i = 0; i < meta_count; ++i) {
        auto key = r.get_string("metadata.key");
        ck.metadata[key] = r.get_string("metadata." + key);
    }

    const auto layout = Model::parameter_layout(config);
    const auto count = r.get<std::uint32_t>("parameters.count");
    if (count != layout.size()) {
        throw FormatError("parameters.count", "expected " + std::to_string(layout.size()) +
                                                  " parameter records, found " +
                                                  std::to_string(count));
    }
    std::vector<NamedTensor> params;
    for (const auto& [expected_name, expected_shape] : layout) {
        const std::string name = r.get_string("parameter.name");
        if (name != expected_name) {
            throw FormatError(name, "unexpected parameter record, wanted '" + expected_name + "'");
        }
        const auto rank = r.get<std::uint32_t>(name + ".rank");
        Shape shape;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape.push_back(r.get<std::uint32_t>(name + ".shape"));
        }
        if (shape != expected_shape) {
            throw FormatError(name, "shape record " + shape_string(shape) +
                                        " does not match config shape " +
                                        shape_string(expected_shape));
        }
        const auto n = r.get<std::uint64_t>(name + ".count");
        if (n != shape_size(shape)) {
            throw FormatError(name, "value count disagrees with shape");
        }
        r.need(n * sizeof(float), name + ".values");
        std::vector<double> values(n);
        for (auto& v : values) {
            v = static_cast<double>(r.get<float>(name + ".values"));
        }
        params.push_back({name, Tensor(shape, std::move(values))});
    }
    if (!r.at_end()) {
        throw FormatError("trailer", "unexpected bytes after last parameter record");
    }
    ck.model = Model::from_parameters(config, std::move(params));
    return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
    const auto bytes = serialize_checkpoint(checkpoint);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open checkpoint for writing: " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing checkpoint: " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint: " + path);
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

} // namespace painscope
