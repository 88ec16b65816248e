// SPDX-License-Identifier: Apache-2.0
#include "modelgen.hpp"

#include <cstring>
#include <random>
#include <sstream>

#include "tensorvault/bitdist.hpp"
#include "tensorvault/montecarlo.hpp"

namespace tvtest {

namespace {

unsigned width_of(tv::DTypeTag tag) {
    switch (tag) {
        case tv::DTypeTag::BF16:
        case tv::DTypeTag::FP16: return 2;
        case tv::DTypeTag::FP32: return 4;
        default: return 4;
    }
}

const char* label_of(tv::DTypeTag tag) {
    switch (tag) {
        case tv::DTypeTag::BF16: return "BF16";
        case tv::DTypeTag::FP16: return "F16";
        case tv::DTypeTag::FP32: return "F32";
        default: return "F32";
    }
}

void put_element(tv::Bytes& buf, std::uint64_t i, unsigned width, std::uint32_t bits) {
    std::memcpy(buf.data() + i * width, &bits, width);
}

// special encodings worth stressing: quiet/signalling NaN payloads, +-Inf,
// negative zero, denormals
std::uint32_t special_bits(unsigned width, std::uint64_t pick) {
    if (width == 2) {
        static const std::uint16_t specials[] = {0x7fc0, 0x7f81, 0xffc1, 0x7f80,
                                                 0xff80, 0x8000, 0x0001, 0x807f};
        return specials[pick % 8];
    }
    static const std::uint32_t specials[] = {0x7fc00000, 0x7f800001, 0xffc00001, 0x7f800000,
                                             0xff800000, 0x80000000, 0x00000001, 0x807fffff};
    return specials[pick % 8];
}

} // namespace

tv::Bytes build_safetensors(const std::vector<GenTensor>& tensors,
                            const std::map<std::string, std::string>& metadata,
                            std::size_t header_pad) {
    std::ostringstream header;
    header << '{';
    bool first = true;
    if (!metadata.empty()) {
        header << "\"__metadata__\":{";
        bool mfirst = true;
        for (const auto& [k, v] : metadata) {
            if (!mfirst) header << ',';
            header << '"' << k << "\":\"" << v << '"';
            mfirst = false;
        }
        header << '}';
        first = false;
    }
    std::uint64_t offset = 0;
    for (const auto& t : tensors) {
        if (!first) header << ',';
        header << '"' << t.name << "\":{\"dtype\":\"" << t.dtype_label << "\",\"shape\":[";
        for (std::size_t i = 0; i < t.shape.size(); ++i) {
            if (i) header << ',';
            header << t.shape[i];
        }
        header << "],\"data_offsets\":[" << offset << ',' << offset + t.bytes.size() << "]}";
        offset += t.bytes.size();
        first = false;
    }
    header << '}';
    std::string h = header.str();
    h.append(header_pad, ' ');

    tv::Bytes out(8 + h.size() + offset);
    tv::store_le64(out.data(), h.size());
    std::memcpy(out.data() + 8, h.data(), h.size());
    std::uint64_t pos = 8 + h.size();
    for (const auto& t : tensors) {
        std::memcpy(out.data() + pos, t.bytes.data(), t.bytes.size());
        pos += t.bytes.size();
    }
    return out;
}

tv::Bytes gaussian_bytes(tv::DTypeTag tag, std::uint64_t n, double sigma,
                         std::uint64_t seed, double special_fraction) {
    const unsigned width = width_of(tag);
    const tv::DType dtype = tv::make_dtype(tag);
    tv::Bytes buf(n * width);
    for (std::uint64_t i = 0; i < n; ++i) {
        auto [z0, z1] = tv::gaussian_pair(seed, i);
        put_element(buf, i, width, tv::encode_element_bits(z0 * sigma, dtype));
    }
    if (special_fraction > 0) {
        std::mt19937_64 rng(seed ^ 0xdecafbadULL);
        std::uniform_real_distribution<double> u(0, 1);
        for (std::uint64_t i = 0; i < n; ++i)
            if (u(rng) < special_fraction) put_element(buf, i, width, special_bits(width, rng()));
    }
    return buf;
}

tv::Bytes add_noise(tv::ByteView base, tv::DTypeTag tag, double sigma_delta,
                    std::uint64_t seed) {
    const unsigned width = width_of(tag);
    const tv::DType dtype = tv::make_dtype(tag);
    const std::uint64_t n = base.size() / width;
    tv::Bytes out(base.size());
    for (std::uint64_t i = 0; i < n; ++i) {
        double v = tv::decode_element(base.data() + i * width, dtype);
        auto [z0, z1] = tv::gaussian_pair(seed, i);
        double noisy = std::isfinite(v) ? v + z0 * sigma_delta : v;
        std::uint32_t bits;
        if (std::isfinite(v)) {
            bits = tv::encode_element_bits(noisy, dtype);
        } else {
            std::memcpy(&bits, base.data() + i * width, width); // keep specials verbatim
        }
        put_element(out, i, width, bits);
    }
    return out;
}

tv::Bytes random_raw_bytes(std::uint64_t n, std::uint64_t seed) {
    tv::Bytes out(n);
    std::mt19937_64 rng(seed);
    std::uint64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        std::uint64_t v = rng();
        std::memcpy(out.data() + i, &v, 8);
    }
    for (; i < n; ++i) out[i] = static_cast<std::uint8_t>(rng());
    return out;
}

void write_model_dir(const std::filesystem::path& dir,
                     const std::vector<std::pair<std::string, tv::Bytes>>& files) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, bytes] : files) {
        auto path = dir / name;
        std::filesystem::create_directories(path.parent_path());
        tv::write_file(path, tv::as_view(bytes));
    }
}

tv::Bytes random_safetensors(std::uint64_t seed, const RandomModelOptions& opts) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> total_dist(opts.min_total_bytes,
                                                            opts.max_total_bytes);
    const std::uint64_t budget = total_dist(rng);
    const int n_tensors = 1 + static_cast<int>(rng() % opts.max_tensors);

    std::vector<GenTensor> tensors;
    std::uint64_t used = 0;
    for (int i = 0; i < n_tensors; ++i) {
        GenTensor t;
        t.name = "block." + std::to_string(rng() % 4) + ".t" + std::to_string(i);

        if (opts.exotic_dtypes && rng() % 8 == 0) {
            // integer / unknown dtype entries stay opaque byte ranges
            switch (rng() % 3) {
                case 0: t.dtype_label = "I8"; break;
                case 1: t.dtype_label = "I64"; break;
                default: t.dtype_label = "F8_E4M3"; break;
            }
            std::uint64_t width = t.dtype_label == "I8" ? 1 : t.dtype_label == "I64" ? 8 : 1;
            std::uint64_t numel = 1 + rng() % 64;
            if (opts.exotic_dtypes && rng() % 6 == 0) numel = 0; // empty tensor
            t.shape = {numel};
            t.bytes = random_raw_bytes(numel * width, rng());
            tensors.push_back(std::move(t));
            continue;
        }

        tv::DTypeTag tag;
        switch (rng() % 3) {
            case 0: tag = tv::DTypeTag::BF16; break;
            case 1: tag = tv::DTypeTag::FP16; break;
            default: tag = tv::DTypeTag::FP32; break;
        }
        t.dtype_label = label_of(tag);
        const unsigned width = width_of(tag);
        std::uint64_t remaining = budget > used ? budget - used : 0;
        std::uint64_t max_elems = remaining / width;
        std::uint64_t numel;
        if (max_elems == 0) {
            numel = 1;
        } else {
            numel = 1 + rng() % std::max<std::uint64_t>(1, max_elems / (n_tensors - i));
        }
        if (rng() % 2 == 0 && numel >= 4) {
            std::uint64_t rows = 1 + rng() % (numel / 2);
            t.shape = {rows, numel / rows};
            numel = rows * (numel / rows);
        } else if (numel == 1 && rng() % 4 == 0) {
            t.shape = {}; // scalar
        } else {
            t.shape = {numel};
        }
        used += numel * width;
        double special_fraction = opts.specials && rng() % 2 == 0 ? 0.002 : 0.0;
        t.bytes = gaussian_bytes(tag, numel, 0.02 + 0.03 * double(rng() % 100) / 100.0,
                                 rng(), special_fraction);
        tensors.push_back(std::move(t));
    }

    std::map<std::string, std::string> metadata;
    if (rng() % 2 == 0) metadata = {{"format", "pt"}, {"origin", "synthetic"}};
    std::size_t pad = rng() % 3 == 0 ? (rng() % 16) : 0;
    return build_safetensors(tensors, metadata, pad);
}

std::vector<std::vector<GenTensor>> make_family(const FamilySpec& spec) {
    std::vector<GenTensor> base;
    for (int t = 0; t < spec.n_tensors; ++t) {
        GenTensor g;
        g.name = t < spec.shared_tensors ? "model.embed." + std::to_string(t)
                                         : "model.layers." + std::to_string(t) + ".weight";
        g.dtype_label = label_of(spec.dtype);
        g.shape = {spec.elements};
        g.bytes = gaussian_bytes(spec.dtype, spec.elements, spec.sigma_w,
                                 spec.seed * 1000 + t);
        base.push_back(std::move(g));
    }

    std::vector<std::vector<GenTensor>> family;
    family.push_back(base);
    for (int m = 1; m < spec.n_models; ++m) {
        std::vector<GenTensor> variant;
        for (int t = 0; t < spec.n_tensors; ++t) {
            GenTensor g = base[t];
            if (t >= spec.shared_tensors)
                g.bytes = add_noise(tv::as_view(base[t].bytes), spec.dtype, spec.sigma_delta,
                                    spec.seed * 7777 + m * 100 + t);
            variant.push_back(std::move(g));
        }
        family.push_back(std::move(variant));
    }
    return family;
}

} // namespace tvtest
