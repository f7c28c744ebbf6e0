#include <array>
#include <fstream>
#include <sstream>

#include "../common/binary_io.hpp"
#include "protovae/dataio/dataset.hpp"
#include "protovae/error.hpp"

namespace protovae::dataio {

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t big_endian_u32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& what) {
    if (offset + 4 > bytes.size()) {
        throw ParseError(what + ": truncated header at offset " + std::to_string(offset));
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex(std::uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex;
    os.width(8);
    os.fill('0');
    os << v;
    return os.str();
}

const std::array<const char*, 10> kCifarNames = {"airplane", "automobile", "bird", "cat", "deer",
                                                 "dog", "frog", "horse", "ship", "truck"};

}  // namespace

RawDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto img = slurp(images);
    const auto lab = slurp(labels);
    const std::string img_what = images.string(), lab_what = labels.string();

    const std::uint32_t img_magic = big_endian_u32(img, 0, img_what);
    if (img_magic != 0x00000803) {
        throw ParseError(img_what + ": bad magic " + hex(img_magic) + " at offset 0 (expected 0x00000803)");
    }
    const std::uint32_t lab_magic = big_endian_u32(lab, 0, lab_what);
    if (lab_magic != 0x00000801) {
        throw ParseError(lab_what + ": bad magic " + hex(lab_magic) + " at offset 0 (expected 0x00000801)");
    }

    const std::size_t n = big_endian_u32(img, 4, img_what);
    const std::size_t rows = big_endian_u32(img, 8, img_what);
    const std::size_t cols = big_endian_u32(img, 12, img_what);
    const std::size_t n_labels = big_endian_u32(lab, 4, lab_what);
    if (n != n_labels) {
        throw ParseError("IDX count mismatch: " + std::to_string(n) + " images vs " + std::to_string(n_labels) +
                         " labels");
    }
    const std::size_t dim = rows * cols;
    if (img.size() != 16 + n * dim) {
        throw ParseError(img_what + ": payload is " + std::to_string(img.size() - 16) + " bytes, expected " +
                         std::to_string(n * dim) + " (truncated or trailing data at offset 16)");
    }
    if (lab.size() != 8 + n) {
        throw ParseError(lab_what + ": payload is " + std::to_string(lab.size() - 8) + " bytes, expected " +
                         std::to_string(n) + " (offset 8)");
    }

    RawDataset out;
    out.images = numgrad::Tensor({n, dim});
    for (std::size_t i = 0; i < n * dim; ++i) out.images[i] = static_cast<double>(img[16 + i]) / 255.0;
    out.labels.resize(n);
    std::int32_t max_label = -1;
    for (std::size_t i = 0; i < n; ++i) {
        out.labels[i] = lab[8 + i];
        max_label = std::max(max_label, out.labels[i]);
    }
    out.num_classes = static_cast<std::size_t>(max_label + 1);
    if (out.num_classes <= 10) {
        out.num_classes = 10;
        for (int d = 0; d < 10; ++d) out.class_names.push_back(std::to_string(d));
    }
    out.provenance = "idx:" + images.filename().string();
    return out;
}

RawDataset load_cifar_binary(std::span<const std::filesystem::path> batches) {
    constexpr std::size_t kRecord = 3073, kDim = 3072;
    std::vector<double> pixels;
    std::vector<std::int32_t> labels;
    std::string provenance = "cifar10:";
    for (const auto& path : batches) {
        const auto bytes = slurp(path);
        if (bytes.size() % kRecord != 0) {
            throw ParseError(path.string() + ": length " + std::to_string(bytes.size()) +
                             " is not a multiple of 3073");
        }
        for (std::size_t r = 0; r < bytes.size() / kRecord; ++r) {
            const std::size_t base = r * kRecord;
            if (bytes[base] > 9) {
                throw ParseError(path.string() + ": label byte " + std::to_string(bytes[base]) + " at offset " +
                                 std::to_string(base) + " exceeds 9");
            }
            labels.push_back(bytes[base]);
            for (std::size_t j = 0; j < kDim; ++j) pixels.push_back(static_cast<double>(bytes[base + 1 + j]) / 255.0);
        }
        provenance += path.filename().string() + ";";
    }
    RawDataset out;
    out.images = numgrad::Tensor({labels.size(), kDim}, std::move(pixels));
    out.labels = std::move(labels);
    out.num_classes = 10;
    out.class_names.assign(kCifarNames.begin(), kCifarNames.end());
    out.provenance = provenance;
    return out;
}

void write_cache(const RawDataset& data, const std::filesystem::path& path) {
    data.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write " + path.string());
    out.write("PVDSET\0\1", 8);
    detail::write_u64(out, data.size());
    detail::write_u64(out, data.dim());
    detail::write_u64(out, data.num_classes);
    detail::write_string(out, data.provenance);
    detail::write_u32(out, static_cast<std::uint32_t>(data.class_names.size()));
    for (const auto& name : data.class_names) detail::write_string(out, name);
    for (double v : data.images.values()) detail::write_f64(out, v);
    for (std::int32_t l : data.labels) detail::write_i32(out, l);
    if (!out) throw ParseError("write failed for " + path.string());
}

RawDataset read_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    detail::Reader r(in, path.string());
    char magic[8];
    r.bytes(magic, 8);
    if (std::string(magic, 8) != std::string("PVDSET\0\1", 8)) {
        throw ParseError(path.string() + ": bad cache magic at offset 0");
    }
    const std::uint64_t n = r.u64(), dim = r.u64(), classes = r.u64();
    RawDataset out;
    out.provenance = r.string();
    const std::uint32_t names = r.u32();
    if (names != 0 && names != classes) throw ParseError(path.string() + ": class name count mismatch");
    for (std::uint32_t i = 0; i < names; ++i) out.class_names.push_back(r.string());
    out.num_classes = classes;
    out.images = numgrad::Tensor({n, dim});
    for (double& v : out.images.values()) v = r.f64();
    out.labels.resize(n);
    for (auto& l : out.labels) l = r.i32();
    r.expect_end();
    out.validate();
    return out;
}

}  // namespace protovae::dataio
