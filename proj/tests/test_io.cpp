#include <fstream>

#include "doctest.h"
#include "reguider/io.hpp"
#include "reguider/rng.hpp"
#include "testutil.hpp"

using namespace reguider;

namespace {

void randomize(std::vector<Param>& params, Rng& rng) {
    for (Param& p : params)
        for (double& v : p.value.values()) v = rng.uniform(-3.0, 3.0);
}

}  // namespace

TEST_CASE("student checkpoints round-trip bit-exactly") {
    Rng rng(1);
    for (StudentKind kind : {StudentKind::two_stage_linear, StudentKind::patch_mlp}) {
        StudentForecaster m = make_student(kind, {3, 12, 5}, 7, 4, 6, 99);
        randomize(m.enc_params, rng);
        randomize(m.head_params, rng);

        testutil::TempDir tmp("ckpt");
        save_student(tmp.file("m.rgm"), m);
        StudentForecaster loaded = load_student(tmp.file("m.rgm"));

        CHECK(loaded.kind == m.kind);
        CHECK(loaded.d_f == m.d_f);
        CHECK(loaded.geo.channels == m.geo.channels);
        CHECK(loaded.geo.lookback == m.geo.lookback);
        CHECK(loaded.geo.horizon == m.geo.horizon);
        CHECK(loaded.seed == m.seed);
        for (std::size_t i = 0; i < m.enc_params.size(); ++i)
            CHECK(loaded.enc_params[i].value.values() == m.enc_params[i].value.values());
        for (std::size_t i = 0; i < m.head_params.size(); ++i)
            CHECK(loaded.head_params[i].value.values() == m.head_params[i].value.values());
    }
}

TEST_CASE("teacher checkpoints round-trip and preserve the digest") {
    TeacherHandle t = make_desk_teacher({2, 16, 8}, 6, 4, 8, 123);
    testutil::TempDir tmp("teacher");
    save_teacher(tmp.file("t.rgm"), t);
    TeacherHandle loaded = load_teacher(tmp.file("t.rgm"));
    CHECK(loaded.d_g == t.d_g);
    CHECK(loaded.frozen_checksum == t.frozen_checksum);
    for (std::size_t i = 0; i < t.enc_params.size(); ++i)
        CHECK(loaded.enc_params[i].value.values() == t.enc_params[i].value.values());

    TeacherHandle cached = make_cached_teacher(2, {{0, {1.0, 2.0}}});
    CHECK_THROWS_AS(save_teacher(tmp.file("c.rgm"), cached), ContractError);
}

TEST_CASE("checkpoint loading validates magic, kind, and truncation") {
    testutil::TempDir tmp("bad");

    std::ofstream(tmp.file("junk.rgm"), std::ios::binary) << "NOPE whatever";
    CHECK_THROWS_AS(load_student(tmp.file("junk.rgm")), IoError);

    StudentForecaster m = make_student(StudentKind::two_stage_linear, {1, 4, 2}, 3, 0, 0, 1);
    save_student(tmp.file("m.rgm"), m);
    CHECK_THROWS_AS(load_teacher(tmp.file("m.rgm")), IoError);  // wrong kind tag

    // truncate the file mid-tensor
    std::ifstream in(tmp.file("m.rgm"), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream(tmp.file("trunc.rgm"), std::ios::binary)
        << bytes.substr(0, bytes.size() / 2);
    CHECK_THROWS_AS(load_student(tmp.file("trunc.rgm")), IoError);

    CHECK_THROWS_AS(load_student(tmp.file("missing.rgm")), IoError);
}

TEST_CASE("embedding cache round-trips records exactly") {
    Rng rng(2);
    EmbeddingCache cache;
    cache.d_f = 3;
    cache.d_g = 2;
    for (std::uint64_t i = 0; i < 5; ++i) {
        EmbeddingRecord r;
        r.origin = i * 7;
        r.label = static_cast<std::uint8_t>(i % 3);
        for (int j = 0; j < 3; ++j) r.h_f.push_back(rng.uniform(-1.0, 1.0));
        for (int j = 0; j < 2; ++j) r.h_g.push_back(rng.uniform(-1.0, 1.0));
        cache.records.push_back(r);
    }

    testutil::TempDir tmp("emb");
    write_embedding_cache(tmp.file("e.rge"), cache);
    EmbeddingCache loaded = read_embedding_cache(tmp.file("e.rge"));
    REQUIRE(loaded.records.size() == cache.records.size());
    CHECK(loaded.d_f == 3);
    CHECK(loaded.d_g == 2);
    for (std::size_t i = 0; i < cache.records.size(); ++i) {
        CHECK(loaded.records[i].origin == cache.records[i].origin);
        CHECK(loaded.records[i].label == cache.records[i].label);
        CHECK(loaded.records[i].h_f == cache.records[i].h_f);
        CHECK(loaded.records[i].h_g == cache.records[i].h_g);
    }
}

TEST_CASE("embedding files without teacher vectors cannot back a teacher") {
    EmbeddingCache cache;
    cache.d_f = 2;
    cache.d_g = 0;
    EmbeddingRecord r;
    r.origin = 0;
    r.h_f = {1.0, 2.0};
    cache.records.push_back(r);

    testutil::TempDir tmp("emb0");
    write_embedding_cache(tmp.file("e.rge"), cache);
    EmbeddingCache loaded = read_embedding_cache(tmp.file("e.rge"));
    CHECK(loaded.d_g == 0);
    CHECK_THROWS_WITH_AS(load_cached_teacher(tmp.file("e.rge")), doctest::Contains("d_g"),
                         ContractError);
}

TEST_CASE("embedding reader rejects garbage") {
    testutil::TempDir tmp("embbad");
    std::ofstream(tmp.file("bad.rge"), std::ios::binary) << "RGM1aaaaaaaaaaaa";
    CHECK_THROWS_AS(read_embedding_cache(tmp.file("bad.rge")), IoError);
    CHECK_THROWS_AS(read_embedding_cache(tmp.file("missing.rge")), IoError);
}
