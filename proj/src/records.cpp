#include "grasp/records.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace grasp::records {
namespace {

using nlohmann::json;

// NaN has no JSON literal; the dumper emits null, so the loader must accept
// it wherever a number is expected.
double load_num(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

json dump_vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd load_vec(const json& a) {
  Eigen::VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v(static_cast<int>(i)) = load_num(a[i]);
  return v;
}

json dump_mat(const Eigen::MatrixXd& m) {
  json cols = json::array();
  for (int c = 0; c < m.cols(); ++c) cols.push_back(dump_vec(m.col(c)));
  return cols;
}

Eigen::MatrixXd load_mat(const json& cols) {
  if (cols.empty()) return {};
  const Eigen::VectorXd first = load_vec(cols[0]);
  Eigen::MatrixXd m(first.size(), cols.size());
  m.col(0) = first;
  for (size_t c = 1; c < cols.size(); ++c) m.col(static_cast<int>(c)) = load_vec(cols[c]);
  return m;
}

json dump_frame(const contact::ContactFrame& f) {
  return {{"p", dump_vec(f.p)}, {"n", dump_vec(f.n)}, {"d", dump_vec(f.d)},
          {"e", dump_vec(f.e)}};
}

contact::ContactFrame load_frame(const json& j) {
  contact::ContactFrame f;
  f.p = load_vec(j.at("p"));
  f.n = load_vec(j.at("n"));
  f.d = load_vec(j.at("d"));
  f.e = load_vec(j.at("e"));
  return f;
}

}  // namespace

std::string to_line(const GraspRecord& r) {
  json j;
  j["version"] = kFormatVersion;
  j["x_p"] = dump_vec(r.x_p);
  j["x"] = dump_vec(r.x);
  j["x_s"] = dump_vec(r.x_s);
  j["energy_total"] = r.energy_total;
  j["per_direction"] = dump_vec(r.per_direction);
  j["contact_forces"] = dump_mat(r.contact_forces);
  json frames = json::array();
  for (const auto& f : r.contacts) frames.push_back(dump_frame(f));
  j["contacts"] = frames;
  j["object_id"] = r.object_id;
  j["object_scale"] = r.object_scale;
  j["seed"] = r.seed;
  j["index"] = r.index;
  j["failed"] = r.failed;
  j["note"] = r.note;
  json stages = json::array();
  for (const auto& s : r.stages)
    stages.push_back({{"stage", s.stage},
                      {"iterations", s.iterations},
                      {"energy_start", s.energy_start},
                      {"energy_end", s.energy_end}});
  j["stages"] = stages;
  return j.dump();
}

GraspRecord from_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw RecordError(std::string("record line is not valid JSON: ") + e.what());
  }
  try {
    const int version = j.at("version").get<int>();
    if (version != kFormatVersion)
      throw RecordError("record version " + std::to_string(version) +
                        " does not match reader version " + std::to_string(kFormatVersion));
    GraspRecord r;
    r.x_p = load_vec(j.at("x_p"));
    r.x = load_vec(j.at("x"));
    r.x_s = load_vec(j.at("x_s"));
    r.energy_total = load_num(j.at("energy_total"));
    r.per_direction = load_vec(j.at("per_direction"));
    r.contact_forces = load_mat(j.at("contact_forces"));
    for (const auto& f : j.at("contacts")) r.contacts.push_back(load_frame(f));
    r.object_id = j.at("object_id").get<std::string>();
    r.object_scale = load_num(j.at("object_scale"));
    r.seed = j.at("seed").get<std::uint64_t>();
    r.index = j.at("index").get<int>();
    r.failed = j.at("failed").get<bool>();
    r.note = j.at("note").get<std::string>();
    for (const auto& s : j.at("stages"))
      r.stages.push_back({s.at("stage").get<std::string>(), s.at("iterations").get<int>(),
                          load_num(s.at("energy_start")), load_num(s.at("energy_end"))});
    return r;
  } catch (const json::exception& e) {
    throw RecordError(std::string("record line is missing fields: ") + e.what());
  }
}

void write_records(const std::string& path, std::span<const GraspRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RecordError(path + ": cannot open for writing");
  for (const auto& r : records) out << to_line(r) << "\n";
  out.flush();
  if (!out) throw RecordError(path + ": write failed");
}

std::vector<GraspRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RecordError(path + ": cannot open records file");
  std::vector<GraspRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(from_line(line));
    } catch (const RecordError& e) {
      throw RecordError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace grasp::records
