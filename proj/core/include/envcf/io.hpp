#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "envcf/grid.hpp"

namespace envcf {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// EnvCF rasters are stored as binary PGM (8-bit grayscale, value = round(v*255))
// with a JSON sidecar ("<stem>.json") carrying GridSpec, role, gray-map range
// and the BS cell when known.
void write_pgm(const std::filesystem::path& path, const Raster& r);
Raster read_pgm(const std::filesystem::path& path);

struct EnvcfMeta {
    GridSpec grid;
    Role role = Role::HR;
    GrayMap gray_map;
    int bs_i = -1, bs_j = -1;  // -1 when unknown
};

void save_envcf(const std::filesystem::path& raster_path, const EnvCF& f, const EnvcfMeta& meta);
std::pair<EnvCF, EnvcfMeta> load_envcf(const std::filesystem::path& raster_path);

// Quantize exactly the way the PGM writer does; used where a pipeline needs
// byte-stable values without a disk round trip.
Raster quantize8(const Raster& r);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace envcf
