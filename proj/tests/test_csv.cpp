#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "pdfm/csv.hpp"
#include "pdfm/errors.hpp"

namespace fs = std::filesystem;

TEST(Csv, DoubleRoundTripIsBitExact) {
  const double cases[] = {0.1, -1.0 / 3.0, 1e-300, 1.7976931348623157e308,
                          42.0, 0.30000000000000004, -0.0};
  for (double v : cases) {
    const auto s = pdfm::format_double(v);
    const double back = pdfm::parse_double(s);
    EXPECT_EQ(std::memcmp(&v, &back, sizeof v), 0) << s;
  }
}

TEST(Csv, ReadWriteRoundTrip) {
  const auto path = fs::temp_directory_path() / "pdfm_test_rw.csv";
  pdfm::CsvTable t;
  t.header = {"id", "x"};
  t.rows = {{"a", "1.5"}, {"b", "-2"}};
  pdfm::write_csv(path, t);
  const auto back = pdfm::read_csv(path);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  fs::remove(path);
}

TEST(Csv, RejectsRaggedRows) {
  const auto path = fs::temp_directory_path() / "pdfm_test_ragged.csv";
  pdfm::write_text_file(path, "a,b\n1,2\n3\n");
  EXPECT_THROW(pdfm::read_csv(path), pdfm::SchemaError);
  fs::remove(path);
}

TEST(Csv, MissingFileIsIoError) {
  EXPECT_THROW(pdfm::read_csv("/nonexistent/nope.csv"), pdfm::IoError);
}
