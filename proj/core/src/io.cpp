#include "envcf/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace envcf {

namespace fs = std::filesystem;
using nlohmann::json;

void write_pgm(const fs::path& path, const Raster& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_pgm: cannot open " + path.string());
    out << "P5\n" << r.w << " " << r.h << "\n255\n";
    std::vector<unsigned char> row(r.w);
    for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) {
            double v = r.at(y, x);
            int q = static_cast<int>(std::lround(v * 255.0));
            row[x] = static_cast<unsigned char>(std::clamp(q, 0, 255));
        }
        out.write(reinterpret_cast<const char*>(row.data()), r.w);
    }
    if (!out) throw IoError("write_pgm: write failed for " + path.string());
}

Raster read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_pgm: cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw IoError("read_pgm: not a binary PGM: " + path.string());
    int w, h, maxval;
    in >> w >> h >> maxval;
    if (!in || w <= 0 || h <= 0 || maxval != 255) throw IoError("read_pgm: bad header: " + path.string());
    in.get();  // single whitespace after maxval
    Raster r(h, w);
    std::vector<unsigned char> row(w);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), w);
        if (!in) throw IoError("read_pgm: truncated data: " + path.string());
        for (int x = 0; x < w; ++x) r.at(y, x) = row[x] / 255.0;
    }
    return r;
}

Raster quantize8(const Raster& r) {
    Raster q(r.h, r.w);
    for (size_t i = 0; i < r.size(); ++i) {
        int v = static_cast<int>(std::lround(r.data[i] * 255.0));
        q.data[i] = std::clamp(v, 0, 255) / 255.0;
    }
    return q;
}

static fs::path sidecar_path(const fs::path& raster_path) {
    fs::path p = raster_path;
    p += ".json";
    return p;
}

void save_envcf(const fs::path& raster_path, const EnvCF& f, const EnvcfMeta& meta) {
    write_pgm(raster_path, f.pixels);
    json j;
    j["area_side_m"] = meta.grid.area_side_m;
    j["resolution"] = meta.grid.resolution;
    j["role"] = meta.role == Role::HR ? "HR" : "LR";
    j["min_db"] = meta.gray_map.min_db;
    j["max_db"] = meta.gray_map.max_db;
    j["bs_cell"] = {meta.bs_i, meta.bs_j};
    write_text_file(sidecar_path(raster_path), j.dump(2) + "\n");
}

std::pair<EnvCF, EnvcfMeta> load_envcf(const fs::path& raster_path) {
    EnvCF f;
    f.pixels = read_pgm(raster_path);
    EnvcfMeta meta;
    fs::path sp = sidecar_path(raster_path);
    if (fs::exists(sp)) {
        json j = json::parse(read_text_file(sp));
        meta.grid = make_grid(j.at("area_side_m").get<double>(), j.at("resolution").get<int>());
        meta.role = j.at("role").get<std::string>() == "LR" ? Role::LR : Role::HR;
        meta.gray_map.min_db = j.at("min_db").get<double>();
        meta.gray_map.max_db = j.at("max_db").get<double>();
        if (j.contains("bs_cell")) {
            meta.bs_i = j["bs_cell"][0].get<int>();
            meta.bs_j = j["bs_cell"][1].get<int>();
        }
    } else {
        // Bare raster (e.g. an external radio-map export): infer a unit grid.
        meta.grid = make_grid(static_cast<double>(f.pixels.w), f.pixels.w);
    }
    f.grid = meta.grid;
    f.role_tag = meta.role;
    if (f.pixels.h != f.grid.resolution || f.pixels.w != f.grid.resolution)
        throw IoError("load_envcf: raster shape disagrees with sidecar grid: " + raster_path.string());
    return {std::move(f), meta};
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_text_file: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_text_file: cannot open " + path.string());
    out << content;
    if (!out) throw IoError("write_text_file: write failed for " + path.string());
}

}  // namespace envcf
