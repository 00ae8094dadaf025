#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "murmur/dataset.hpp"
#include "murmur/error.hpp"
#include "murmur/random.hpp"

namespace murmur {

namespace fs = std::filesystem;

namespace {

Location circor_location(const std::string& token) {
  if (token == "AV") return Location::AV;
  if (token == "PV") return Location::PV;
  if (token == "TV") return Location::TV;
  if (token == "MV") return Location::MV;
  return Location::Other;  // "Phc" and anything else
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

}  // namespace

DatasetManifest circor_manifest(const fs::path& data_dir, std::uint64_t seed,
                                double train_fraction, double validation_fraction) {
  if (!fs::is_directory(data_dir))
    throw Error(ErrorCode::IoError, "not a directory: " + data_dir.string());

  std::vector<fs::path> headers;
  for (const auto& entry : fs::directory_iterator(data_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt") headers.push_back(entry.path());
  std::sort(headers.begin(), headers.end());

  std::vector<PatientRecord> patients;
  for (const auto& header : headers) {
    std::ifstream in(header);
    std::string first;
    if (!std::getline(in, first)) continue;
    std::istringstream head(first);
    PatientRecord rec;
    int n_rec = 0;
    if (!(head >> rec.patient_id >> n_rec) || n_rec <= 0)
      throw Error(ErrorCode::ParseError, header.string() + ": malformed first line");
    std::map<Location, int> seen;
    for (int i = 0; i < n_rec; ++i) {
      std::string line;
      if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, header.string() + ": truncated");
      std::istringstream fields(line);
      std::string loc, hea, wav;
      if (!(fields >> loc >> hea >> wav))
        throw Error(ErrorCode::ParseError, header.string() + ": malformed recording line");
      const auto location = circor_location(loc);
      if (++seen[location] > 2) continue;  // manifest admits at most two per location
      rec.recordings.push_back({location, (data_dir / wav).string()});
    }
    std::string line;
    bool labelled = false;
    while (std::getline(in, line)) {
      if (line.rfind("#Murmur:", 0) == 0) {
        rec.label = parse_label(trim(line.substr(8)));
        labelled = true;
      }
    }
    if (!labelled) throw Error(ErrorCode::ParseError, header.string() + ": missing #Murmur line");
    patients.push_back(std::move(rec));
  }

  Rng rng(derive_seed(seed, 200));
  shuffle(patients.begin(), patients.end(), rng);
  const auto n = patients.size();
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * validation_fraction));
  DatasetManifest manifest;
  for (std::size_t i = 0; i < n; ++i) {
    patients[i].split = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Validation : Split::Test);
    manifest.entries.push_back(std::move(patients[i]));
  }
  return manifest;
}

}  // namespace murmur
