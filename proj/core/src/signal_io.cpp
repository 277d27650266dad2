#include "nbtoa/signal_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <openssl/evp.h>

#include <json.hpp>

namespace nbtoa::io {
namespace {

std::filesystem::path stem_of(const std::filesystem::path& path) {
    auto ext = path.extension();
    if (ext == ".c128" || ext == ".json") {
        auto p = path;
        return p.replace_extension();
    }
    return path;
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
    return std::filesystem::path(stem.string() + suffix);
}

void put_le64(std::uint64_t v, unsigned char* out) {
    for (int i = 0; i < 8; ++i) {
        out[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFU);
    }
}

std::uint64_t get_le64(const unsigned char* in) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
    }
    return v;
}

std::vector<unsigned char> encode_samples(const Signal& s) {
    std::vector<unsigned char> bytes(s.size() * 16);
    for (std::size_t k = 0; k < s.size(); ++k) {
        put_le64(std::bit_cast<std::uint64_t>(s[k].real()), &bytes[16 * k]);
        put_le64(std::bit_cast<std::uint64_t>(s[k].imag()), &bytes[16 * k + 8]);
    }
    return bytes;
}

} // namespace

void write_signal(const std::filesystem::path& path, const Signal& s) {
    const auto stem = stem_of(path);
    if (stem.has_parent_path()) {
        std::filesystem::create_directories(stem.parent_path());
    }
    const auto    bytes = encode_samples(s);
    std::ofstream bin(with_suffix(stem, ".c128"), std::ios::binary | std::ios::trunc);
    if (!bin) {
        throw std::runtime_error(fmt::format("cannot open {} for writing", with_suffix(stem, ".c128").string()));
    }
    bin.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));

    nlohmann::ordered_json meta;
    meta["rate_hz"]   = s.rate();
    meta["t0_s"]      = s.t0();
    meta["n_samples"] = s.size();
    std::ofstream js(with_suffix(stem, ".json"), std::ios::trunc);
    if (!js) {
        throw std::runtime_error(fmt::format("cannot open {} for writing", with_suffix(stem, ".json").string()));
    }
    js << meta.dump(2) << '\n';
    if (!bin || !js) {
        throw std::runtime_error(fmt::format("write failed for signal {}", stem.string()));
    }
}

Signal read_signal(const std::filesystem::path& path) {
    const auto    stem = stem_of(path);
    std::ifstream js(with_suffix(stem, ".json"));
    if (!js) {
        throw std::runtime_error(fmt::format("cannot open signal sidecar {}", with_suffix(stem, ".json").string()));
    }
    const auto  meta = nlohmann::json::parse(js);
    const auto  n    = meta.at("n_samples").get<std::size_t>();
    const auto  rate = meta.at("rate_hz").get<double>();
    const auto  t0   = meta.value("t0_s", 0.0);

    std::ifstream bin(with_suffix(stem, ".c128"), std::ios::binary);
    if (!bin) {
        throw std::runtime_error(fmt::format("cannot open signal data {}", with_suffix(stem, ".c128").string()));
    }
    std::vector<unsigned char> bytes(n * 16);
    bin.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (bin.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw std::runtime_error(fmt::format("signal data {} is shorter than the {} samples declared", stem.string(), n));
    }
    std::vector<cplx> samples(n);
    for (std::size_t k = 0; k < n; ++k) {
        samples[k] = {std::bit_cast<double>(get_le64(&bytes[16 * k])), std::bit_cast<double>(get_le64(&bytes[16 * k + 8]))};
    }
    return Signal(std::move(samples), rate, t0);
}

void write_signal_csv(const std::filesystem::path& path, const Signal& s) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    }
    out << "index,re,im\n";
    for (std::size_t k = 0; k < s.size(); ++k) {
        out << fmt::format("{},{:.17g},{:.17g}\n", k, s[k].real(), s[k].imag());
    }
}

std::string signal_digest(const Signal& s) {
    auto bytes = encode_samples(s);
    std::array<unsigned char, 16> axis{};
    put_le64(std::bit_cast<std::uint64_t>(s.rate()), axis.data());
    put_le64(std::bit_cast<std::uint64_t>(s.t0()), axis.data() + 8);
    bytes.insert(bytes.end(), axis.begin(), axis.end());

    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int                               len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("signal_digest: SHA-256 failed");
    }
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        hex += fmt::format("{:02x}", digest[i]);
    }
    return hex;
}

} // namespace nbtoa::io
