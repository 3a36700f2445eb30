#include "mva/tensor_io.h"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>

namespace mva {
namespace {

constexpr std::array<char, 4> kTensorMagic{'M', 'V', 'T', 'N'};
constexpr std::array<char, 4> kCheckpointMagic{'M', 'V', 'C', 'K'};

template <typename T>
void put_le(std::ostream& os, T value) {
    static_assert(std::is_unsigned_v<T>);
    std::array<char, sizeof(T)> buf{};
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    }
    os.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& is, const char* what) {
    static_assert(std::is_unsigned_v<T>);
    std::array<unsigned char, sizeof(T)> buf{};
    if (!is.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
        throw FormatError(std::string("truncated input reading ") + what);
    }
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(buf[i]) << (8 * i);
    }
    return value;
}

void expect_magic(std::istream& is, const std::array<char, 4>& magic) {
    std::array<char, 4> got{};
    if (!is.read(got.data(), got.size())) {
        throw FormatError("truncated input reading magic");
    }
    if (got != magic) {
        throw FormatError("bad magic: expected " + std::string(magic.data(), 4));
    }
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& tensor) {
    os.write(kTensorMagic.data(), kTensorMagic.size());
    put_le<std::uint16_t>(os, kTensorFormatVersion);
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(tensor.dtype()));
    if (tensor.rank() > std::numeric_limits<std::uint8_t>::max()) {
        throw FormatError("rank too large for MVTN");
    }
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t extent : tensor.shape()) {
        put_le<std::uint64_t>(os, extent);
    }
    if (tensor.dtype() == DType::f32) {
        for (double v : tensor.data()) {
            put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    } else {
        for (double v : tensor.data()) {
            put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
        }
    }
}

Tensor read_tensor(std::istream& is) {
    expect_magic(is, kTensorMagic);
    const auto version = get_le<std::uint16_t>(is, "version");
    if (version != kTensorFormatVersion) {
        throw FormatError("unsupported MVTN version " + std::to_string(version));
    }
    const auto code = get_le<std::uint8_t>(is, "dtype");
    if (code != 1 && code != 2) {
        throw FormatError("unknown dtype code " + std::to_string(code));
    }
    const auto dtype = static_cast<DType>(code);
    const auto rank = get_le<std::uint8_t>(is, "rank");
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& extent : shape) {
        const auto e = get_le<std::uint64_t>(is, "extent");
        if (e == 0) throw FormatError("zero extent in MVTN shape");
        if (e > (std::uint64_t{1} << 40) || numel > (std::size_t{1} << 40) / e) {
            throw FormatError("MVTN shape too large");
        }
        extent = static_cast<std::size_t>(e);
        numel *= extent;
    }
    std::vector<double> data(numel);
    if (dtype == DType::f32) {
        for (double& v : data) {
            v = std::bit_cast<float>(get_le<std::uint32_t>(is, "payload"));
        }
    } else {
        for (double& v : data) {
            v = std::bit_cast<double>(get_le<std::uint64_t>(is, "payload"));
        }
    }
    return Tensor(std::move(shape), std::move(data), dtype);
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
    std::ostringstream os(std::ios::binary);
    write_tensor(os, tensor);
    const std::string s = os.str();
    return {s.begin(), s.end()};
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
    std::istringstream is(std::string(bytes.begin(), bytes.end()), std::ios::binary);
    Tensor t = read_tensor(is);
    if (is.peek() != std::char_traits<char>::eof()) {
        throw FormatError("trailing bytes after MVTN record");
    }
    return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& tensor) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_tensor(os, tensor);
    if (!os) throw IoError("write failed: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return read_tensor(is);
}

void write_checkpoint(std::ostream& os, const std::vector<NamedTensor>& tensors) {
    os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
    put_le<std::uint16_t>(os, kCheckpointFormatVersion);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw FormatError("tensor name too long: " + name.substr(0, 32) + "...");
        }
        put_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_tensor(os, tensor);
    }
}

std::vector<NamedTensor> read_checkpoint(std::istream& is) {
    expect_magic(is, kCheckpointMagic);
    const auto version = get_le<std::uint16_t>(is, "version");
    if (version != kCheckpointFormatVersion) {
        throw FormatError("unsupported MVCK version " + std::to_string(version));
    }
    const auto count = get_le<std::uint32_t>(is, "tensor count");
    std::vector<NamedTensor> out;
    out.reserve(std::min<std::uint32_t>(count, 4096));
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = get_le<std::uint16_t>(is, "name length");
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) throw FormatError("truncated tensor name");
        out.emplace_back(std::move(name), read_tensor(is));
    }
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_checkpoint(os, tensors);
    if (!os) throw IoError("write failed: " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return read_checkpoint(is);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace mva
