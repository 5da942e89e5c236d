#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "spm/learn.hpp"

namespace spm {

// Malformed dataset or model file.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// "spd v1 <dim> <count> <classes>" followed by one record per line:
// label, then the upper triangle row-major with 17 significant digits.
void write_dataset(std::ostream& os, const LabeledSpdDataset& data);
LabeledSpdDataset read_dataset(std::istream& is, bool project = false);

void save_dataset(const std::string& path, const LabeledSpdDataset& data);
LabeledSpdDataset load_dataset(const std::string& path, bool project = false);

std::string model_to_json(const ProbeModel& model);
ProbeModel model_from_json(const std::string& text);

void save_model(const std::string& path, const ProbeModel& model);
ProbeModel load_model(const std::string& path);

// Accepts either a bare spline curve document or a probe model holding one.
SplineCurve load_spline(const std::string& path);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace spm
