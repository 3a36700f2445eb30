#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include "mva/tensor_io.h"
#include "oracle.h"

using namespace mva;

namespace {

Tensor random_payload(std::mt19937_64& gen) {
    const std::size_t rank = oracle::random_extent(gen, 0, 4);
    Shape shape;
    for (std::size_t i = 0; i < rank; ++i) shape.push_back(oracle::random_extent(gen, 1, 5));
    const DType dtype = gen() % 2 ? DType::f32 : DType::f64;
    Tensor t(shape, dtype);
    auto d = t.mutable_data();
    const double specials[] = {0.0, -0.0, std::numeric_limits<double>::infinity(),
                               -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::quiet_NaN(),
                               std::numeric_limits<double>::denorm_min(), 1e300};
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (double& v : d) v = gen() % 8 == 0 ? specials[gen() % 7] : u(gen);
    t.round_to_dtype();
    return t;
}

std::string bytes_of(const Tensor& t) {
    std::ostringstream os;
    write_tensor(os, t);
    return os.str();
}

std::string bytes_of(const std::vector<NamedTensor>& ck) {
    std::ostringstream os;
    write_checkpoint(os, ck);
    return os.str();
}

}  // namespace

TEST(Mvtn, HeaderLayout) {
    const std::string b = bytes_of(Tensor({2, 3}, std::vector<double>(6, 1.5)));
    ASSERT_EQ(b.size(), 4u + 2 + 1 + 1 + 2 * 8 + 6 * 8);
    EXPECT_EQ(b.substr(0, 4), "MVTN");
    EXPECT_EQ(static_cast<unsigned char>(b[4]), 1u);  // version, little endian
    EXPECT_EQ(static_cast<unsigned char>(b[5]), 0u);
    EXPECT_EQ(static_cast<unsigned char>(b[6]), 2u);  // f64
    EXPECT_EQ(static_cast<unsigned char>(b[7]), 2u);  // rank
    EXPECT_EQ(static_cast<unsigned char>(b[8]), 2u);
    EXPECT_EQ(static_cast<unsigned char>(b[16]), 3u);
    EXPECT_EQ(bytes_of(Tensor({4}, DType::f32)).size(), 8u + 8 + 4 * 4);
}

TEST(Mvtn, RoundTripByteIdentical) {
    std::mt19937_64 gen(1);
    for (int i = 0; i < 50; ++i) {
        const Tensor t = random_payload(gen);
        const std::string first = bytes_of(t);
        std::istringstream is(first);
        const Tensor back = read_tensor(is);
        EXPECT_TRUE(back.identical(t));
        EXPECT_EQ(back.dtype(), t.dtype());
        EXPECT_EQ(bytes_of(back), first);
    }
}

TEST(Mvtn, RejectsMalformed) {
    const std::string good = bytes_of(Tensor({2}, {1.0, 2.0}));
    const auto decode = [](const std::string& s) {
        return decode_tensor(std::vector<std::uint8_t>(s.begin(), s.end()));
    };
    EXPECT_THROW(decode("XXXX" + good.substr(4)), FormatError);
    EXPECT_THROW(decode(good.substr(0, good.size() - 1)), FormatError);
    EXPECT_THROW(decode(good + "x"), FormatError);
    std::string bad_dtype = good;
    bad_dtype[6] = 9;
    EXPECT_THROW(decode(bad_dtype), FormatError);
    std::string bad_version = good;
    bad_version[4] = 2;
    EXPECT_THROW(decode(bad_version), FormatError);
}

TEST(Mvck, RoundTripByteIdentical) {
    std::mt19937_64 gen(2);
    const std::string names[] = {"w1", "b1", "attention.k1d", "stem.weight", "\xc3\xa9t\xc3\xa9", ""};
    for (int i = 0; i < 50; ++i) {
        std::vector<NamedTensor> ck;
        for (std::size_t n = oracle::random_extent(gen, 0, 5); n > 0; --n) {
            ck.emplace_back(names[gen() % 6] + std::to_string(n), random_payload(gen));
        }
        const std::string first = bytes_of(ck);
        EXPECT_EQ(first.substr(0, 4), "MVCK");
        std::istringstream is(first);
        const auto back = read_checkpoint(is);
        ASSERT_EQ(back.size(), ck.size());
        for (std::size_t k = 0; k < ck.size(); ++k) {
            EXPECT_EQ(back[k].first, ck[k].first);
            EXPECT_TRUE(back[k].second.identical(ck[k].second));
        }
        EXPECT_EQ(bytes_of(back), first);
    }
}

TEST(Mvck, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "mva_tensor_io_test.mvck";
    const std::vector<NamedTensor> ck{{"a", Tensor({2}, {1, 2})}, {"b", Tensor({1}, {3}, DType::f32)}};
    save_checkpoint(path, ck);
    const auto back = load_checkpoint(path);
    EXPECT_EQ(bytes_of(back), bytes_of(ck));
    std::filesystem::remove(path);
    EXPECT_THROW(load_checkpoint(path), IoError);
    EXPECT_THROW(load_tensor(path), IoError);
}
