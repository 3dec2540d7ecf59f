#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "trialref/common.h"
#include "trialref/io.h"
#include "trialref/random.h"

using namespace trialref;

TEST(Io, Sha256) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.05), "0.05");
}

TEST(Io, KeyValues) {
  auto kv = parse_key_values("# comment\n a = 1 \n\nb=x y\na = 2\n");
  ASSERT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"a", "1"}));
  EXPECT_EQ(kv[1].second, "x y");
  EXPECT_EQ(kv[2].second, "2");
  EXPECT_THROW(parse_key_values("novalue\n"), InputError);
}

TEST(Io, Lists) {
  EXPECT_EQ(parse_double_list("1, 2.5,3"), (std::vector<double>{1, 2.5, 3}));
  EXPECT_THROW(parse_double_list("1, x"), InputError);
  EXPECT_EQ(split("a,,b", ','), (std::vector<std::string>{"a", "", "b"}));
  EXPECT_EQ(trim("  x \t"), "x");
}

TEST(Io, FilesAtomic) {
  auto p = std::filesystem::temp_directory_path() / "trialref_io_test.txt";
  write_file_atomic(p, "hello");
  EXPECT_EQ(read_file(p), "hello");
  EXPECT_EQ(sha256_file(p), sha256_hex("hello"));
  std::filesystem::remove(p);
  EXPECT_THROW(read_file(p), InputError);
}

TEST(Random, DerivedSeedsDiffer) {
  EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
  EXPECT_NE(derive_seed(1, std::uint64_t{0}), derive_seed(1, std::uint64_t{1}));
}
