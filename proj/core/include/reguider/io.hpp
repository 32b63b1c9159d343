#ifndef REGUIDER_IO_HPP
#define REGUIDER_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "reguider/models.hpp"

namespace reguider {

// RGM1 checkpoint: magic "RGM1"; u32 kind tag; u32 C,L,T; u32 embed width;
// u32 patch length; u32 hidden width; u64 seed; u32 tensor count; per tensor
// u32 name length + bytes, u32 rank, u64 dims, little-endian f64 payload.
void save_student(const std::string& path, const StudentForecaster& m);
StudentForecaster load_student(const std::string& path);

void save_teacher(const std::string& path, const TeacherHandle& t);  // desk teachers only
TeacherHandle load_teacher(const std::string& path);

// RGE1 embedding cache: magic "RGE1"; u32 record count; u32 d_f; u32 d_g
// (0 when no teacher vectors); per record u64 window origin, u8 trend label
// (0 down / 1 flat / 2 up), d_f doubles, d_g doubles. Little-endian.
struct EmbeddingRecord {
    std::uint64_t origin = 0;
    std::uint8_t label = 0;
    std::vector<double> h_f;
    std::vector<double> h_g;
};

struct EmbeddingCache {
    std::uint32_t d_f = 0;
    std::uint32_t d_g = 0;
    std::vector<EmbeddingRecord> records;
};

void write_embedding_cache(const std::string& path, const EmbeddingCache& cache);
EmbeddingCache read_embedding_cache(const std::string& path);

// Builds a frozen cached teacher from the d_g block of an RGE1 file.
TeacherHandle load_cached_teacher(const std::string& path);

}  // namespace reguider

#endif
