#include "reguider/io.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace reguider {

namespace {

// explicit little-endian encoding keeps the formats byte-stable everywhere

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(os, bits);
}

void put_bytes(std::ostream& os, const std::string& s) {
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated file: " + path);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated file: " + path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is, const std::string& path) {
    std::uint64_t bits = get_u64(is, path);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

std::uint8_t get_u8(std::istream& is, const std::string& path) {
    char c;
    if (!is.read(&c, 1)) throw IoError("truncated file: " + path);
    return static_cast<std::uint8_t>(c);
}

void expect_magic(std::istream& is, const char* magic, const std::string& path) {
    char buf[4];
    if (!is.read(buf, 4) || std::memcmp(buf, magic, 4) != 0)
        throw IoError("file " + path + " is not a " + magic + " file");
}

void put_tensor(std::ostream& os, const Param& p) {
    put_u32(os, static_cast<std::uint32_t>(p.name.size()));
    put_bytes(os, p.name);
    put_u32(os, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put_u64(os, d);
    for (double v : p.value.values()) put_f64(os, v);
}

Param get_tensor(std::istream& is, const std::string& path) {
    std::uint32_t name_len = get_u32(is, path);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw IoError("truncated file: " + path);
    std::uint32_t rank = get_u32(is, path);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get_u64(is, path));
    Tensor t(shape);
    for (double& v : t.values()) v = get_f64(is, path);
    return {std::move(name), std::move(t)};
}

constexpr std::uint32_t kKindTwoStageLinear = 0;
constexpr std::uint32_t kKindPatchMlp = 1;
constexpr std::uint32_t kKindDeskTeacher = 2;

struct ModelBlob {
    std::uint32_t kind = 0;
    Geometry geo;
    std::size_t embed = 0;
    std::size_t patch_len = 0;
    std::size_t hidden = 0;
    std::uint64_t seed = 0;
    std::vector<Param> params;
};

void write_blob(const std::string& path, const ModelBlob& blob) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint: " + path);
    put_bytes(os, "RGM1");
    put_u32(os, blob.kind);
    put_u32(os, static_cast<std::uint32_t>(blob.geo.channels));
    put_u32(os, static_cast<std::uint32_t>(blob.geo.lookback));
    put_u32(os, static_cast<std::uint32_t>(blob.geo.horizon));
    put_u32(os, static_cast<std::uint32_t>(blob.embed));
    put_u32(os, static_cast<std::uint32_t>(blob.patch_len));
    put_u32(os, static_cast<std::uint32_t>(blob.hidden));
    put_u64(os, blob.seed);
    put_u32(os, static_cast<std::uint32_t>(blob.params.size()));
    for (const Param& p : blob.params) put_tensor(os, p);
    if (!os) throw IoError("write failed: " + path);
}

ModelBlob read_blob(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    expect_magic(is, "RGM1", path);
    ModelBlob blob;
    blob.kind = get_u32(is, path);
    blob.geo.channels = get_u32(is, path);
    blob.geo.lookback = get_u32(is, path);
    blob.geo.horizon = get_u32(is, path);
    blob.embed = get_u32(is, path);
    blob.patch_len = get_u32(is, path);
    blob.hidden = get_u32(is, path);
    blob.seed = get_u64(is, path);
    std::uint32_t n = get_u32(is, path);
    blob.params.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) blob.params.push_back(get_tensor(is, path));
    return blob;
}

}  // namespace

void save_student(const std::string& path, const StudentForecaster& m) {
    ModelBlob blob;
    blob.kind = m.kind == StudentKind::two_stage_linear ? kKindTwoStageLinear : kKindPatchMlp;
    blob.geo = m.geo;
    blob.embed = m.d_f;
    blob.patch_len = m.patch_len;
    blob.hidden = m.hidden;
    blob.seed = m.seed;
    blob.params = m.enc_params;
    blob.params.insert(blob.params.end(), m.head_params.begin(), m.head_params.end());
    write_blob(path, blob);
}

StudentForecaster load_student(const std::string& path) {
    ModelBlob blob = read_blob(path);
    if (blob.kind != kKindTwoStageLinear && blob.kind != kKindPatchMlp)
        throw IoError("checkpoint " + path + " does not hold a student model");
    StudentKind kind =
        blob.kind == kKindTwoStageLinear ? StudentKind::two_stage_linear : StudentKind::patch_mlp;
    StudentForecaster m = make_student(kind, blob.geo, blob.embed, blob.patch_len, blob.hidden,
                                       blob.seed);
    const std::size_t n_enc = m.enc_params.size();
    if (blob.params.size() != n_enc + m.head_params.size())
        throw IoError("checkpoint " + path + " has unexpected tensor count");
    for (std::size_t i = 0; i < blob.params.size(); ++i) {
        Param& dst = i < n_enc ? m.enc_params[i] : m.head_params[i - n_enc];
        if (blob.params[i].name != dst.name || blob.params[i].value.shape() != dst.value.shape())
            throw IoError("checkpoint " + path + " tensor " + blob.params[i].name +
                          " does not match the declared architecture");
        dst.value = std::move(blob.params[i].value);
    }
    return m;
}

void save_teacher(const std::string& path, const TeacherHandle& t) {
    if (t.kind != TeacherKind::desk)
        throw ContractError("only desk teachers are saved as checkpoints; caches are RGE1 files");
    ModelBlob blob;
    blob.kind = kKindDeskTeacher;
    blob.geo = t.geo;
    blob.embed = t.d_g;
    blob.patch_len = t.patch_len;
    blob.hidden = t.hidden;
    blob.seed = t.seed;
    blob.params = t.enc_params;
    write_blob(path, blob);
}

TeacherHandle load_teacher(const std::string& path) {
    ModelBlob blob = read_blob(path);
    if (blob.kind != kKindDeskTeacher)
        throw IoError("checkpoint " + path + " does not hold a teacher");
    TeacherHandle t;
    t.kind = TeacherKind::desk;
    t.geo = blob.geo;
    t.d_g = blob.embed;
    t.patch_len = blob.patch_len;
    t.hidden = blob.hidden;
    t.seed = blob.seed;
    t.enc_params = std::move(blob.params);
    t.frozen_checksum = teacher_digest(t);
    return t;
}

void write_embedding_cache(const std::string& path, const EmbeddingCache& cache) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write embedding file: " + path);
    put_bytes(os, "RGE1");
    put_u32(os, static_cast<std::uint32_t>(cache.records.size()));
    put_u32(os, cache.d_f);
    put_u32(os, cache.d_g);
    for (const EmbeddingRecord& r : cache.records) {
        if (r.h_f.size() != cache.d_f || r.h_g.size() != cache.d_g)
            throw ContractError("embedding record width mismatch for window " +
                                std::to_string(r.origin));
        put_u64(os, r.origin);
        os.put(static_cast<char>(r.label));
        for (double v : r.h_f) put_f64(os, v);
        for (double v : r.h_g) put_f64(os, v);
    }
    if (!os) throw IoError("write failed: " + path);
}

EmbeddingCache read_embedding_cache(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open embedding file: " + path);
    expect_magic(is, "RGE1", path);
    EmbeddingCache cache;
    std::uint32_t count = get_u32(is, path);
    cache.d_f = get_u32(is, path);
    cache.d_g = get_u32(is, path);
    cache.records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        EmbeddingRecord r;
        r.origin = get_u64(is, path);
        r.label = get_u8(is, path);
        if (r.label > 2)
            throw IoError("embedding file " + path + " has invalid trend label " +
                          std::to_string(r.label));
        r.h_f.resize(cache.d_f);
        for (double& v : r.h_f) v = get_f64(is, path);
        r.h_g.resize(cache.d_g);
        for (double& v : r.h_g) v = get_f64(is, path);
        cache.records.push_back(std::move(r));
    }
    return cache;
}

TeacherHandle load_cached_teacher(const std::string& path) {
    EmbeddingCache cache = read_embedding_cache(path);
    if (cache.d_g == 0)
        throw ContractError("embedding file " + path +
                            " carries no teacher vectors (d_g = 0); cannot act as a teacher");
    std::map<std::uint64_t, std::vector<double>> by_id;
    for (EmbeddingRecord& r : cache.records) by_id[r.origin] = std::move(r.h_g);
    return make_cached_teacher(cache.d_g, std::move(by_id));
}

}  // namespace reguider
