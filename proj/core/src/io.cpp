#include "graspr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "graspr/error.hpp"
#include "json.hpp"

namespace graspr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------- CSV

struct CsvTable {
  std::string name;  // kind, for messages
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;

  int Column(std::string_view col) const {
    const auto it = std::find(header.begin(), header.end(), col);
    if (it == header.end()) throw Error(ErrorCode::kSchema, fmt::format("{} table has no column '{}'", name, col));
    return static_cast<int>(it - header.begin());
  }
  const std::string& At(std::size_t row, int col) const { return rows[row][static_cast<std::size_t>(col)]; }
  [[noreturn]] void Fail(std::size_t row, int col, std::string_view what) const {
    throw Error(ErrorCode::kSchema,
                fmt::format("{} line {}, field '{}': {}", name, lines[row], header[static_cast<std::size_t>(col)], what));
  }
  double Number(std::size_t row, int col) const {
    const std::string& s = At(row, col);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      Fail(row, col, fmt::format("'{}' is not a finite number", s));
    }
    return v;
  }
  int Integer(std::size_t row, int col) const {
    const std::string& s = At(row, col);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) Fail(row, col, fmt::format("'{}' is not an integer", s));
    return v;
  }
};

std::vector<std::string> Split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string Preamble(std::string_view kind) {
  return fmt::format("#graspr-csv schema_version={} kind={}\n", kSchemaVersion, kind);
}

CsvTable ParseCsv(std::string_view text, std::string_view kind) {
  CsvTable t;
  t.name = std::string(kind);
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  bool seen_preamble = false, seen_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!seen_preamble) {
      const std::string expected = Preamble(kind);
      if (line != std::string_view(expected).substr(0, expected.size() - 1)) {
        throw Error(ErrorCode::kSchema, fmt::format("{} line {}: expected '{}'", kind, number,
                                                    expected.substr(0, expected.size() - 1)),
                    line.substr(0, 80));
      }
      seen_preamble = true;
      continue;
    }
    if (line.front() == '#') continue;
    std::vector<std::string> fields = Split(line);
    if (!seen_header) {
      t.header = std::move(fields);
      seen_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw Error(ErrorCode::kSchema,
                  fmt::format("{} line {}: expected {} fields, found {}", kind, number, t.header.size(), fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.lines.push_back(number);
  }
  if (!seen_preamble || !seen_header) throw Error(ErrorCode::kSchema, fmt::format("{} table is missing its header", kind));
  return t;
}

void CheckId(std::string_view id, std::string_view what) {
  if (id.empty()) throw Error(ErrorCode::kSchema, fmt::format("{} is empty", what));
  if (id.find_first_of(",\"\r\n") != std::string_view::npos) {
    throw Error(ErrorCode::kSchema, fmt::format("{} '{}' contains a comma, quote or line break", what, id));
  }
}

// ---------------------------------------------------------------- JSON

json Parse(std::string_view text, std::string_view kind) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchema, fmt::format("{}: invalid JSON", kind), e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kSchema, fmt::format("{}: expected a JSON object", kind));
  if (!j.contains("schema_version") || j["schema_version"] != kSchemaVersion) {
    throw Error(ErrorCode::kSchema, fmt::format("{}: unsupported or missing schema_version", kind));
  }
  if (!j.contains("kind") || j["kind"] != kind) {
    throw Error(ErrorCode::kSchema, fmt::format("expected a '{}' document", kind),
                j.contains("kind") ? j["kind"].dump() : "no kind");
  }
  return j;
}

json Header(std::string_view kind) {
  json j = json::object();
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  return j;
}

const json& Field(const json& j, std::string_view key, std::string_view where) {
  const auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::kSchema, fmt::format("{}: missing field '{}'", where, key));
  return *it;
}

template <typename T>
T Get(const json& j, std::string_view key, std::string_view where) {
  try {
    return Field(j, key, where).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, fmt::format("{}: field '{}' has the wrong type", where, key), e.what());
  }
}

json ToJson(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json ToJson(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd VectorFrom(const json& j, std::string_view key, std::string_view where) {
  const auto v = Get<std::vector<double>>(j, key, where);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vec3 Vec3From(const json& j, std::string_view key, std::string_view where) {
  const Eigen::VectorXd v = VectorFrom(j, key, where);
  if (v.size() != 3) throw Error(ErrorCode::kSchema, fmt::format("{}: '{}' must have 3 entries", where, key));
  return v;
}

json ToJson(const Transform& t) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({t.linear()(r, 0), t.linear()(r, 1), t.linear()(r, 2)});
  return {{"rotation", rot}, {"translation", ToJson(Vec3(t.translation()))}};
}

Transform TransformFrom(const json& j, std::string_view where) {
  const auto rot = Get<std::vector<std::vector<double>>>(j, "rotation", where);
  Mat3 r;
  if (rot.size() != 3) throw Error(ErrorCode::kSchema, fmt::format("{}: rotation must be 3x3", where));
  for (int i = 0; i < 3; ++i) {
    if (rot[i].size() != 3) throw Error(ErrorCode::kSchema, fmt::format("{}: rotation must be 3x3", where));
    for (int k = 0; k < 3; ++k) r(i, k) = rot[i][k];
  }
  if (!((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9) || !(r.determinant() > 0.0)) {
    throw Error(ErrorCode::kSchema, fmt::format("{}: rotation is not orthonormal", where));
  }
  Transform t = Transform::Identity();
  t.linear() = r;
  t.translation() = Vec3From(j, "translation", where);
  return t;
}

std::string Dump(const json& j) { return j.dump(2) + "\n"; }

std::string Rfc3339Pattern() {
  return R"(^\d{4}-\d{2}-\d{2}[Tt]\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+-]\d{2}:\d{2})$)";
}

}  // namespace

// ---------------------------------------------------------------- files

std::string ReadTextFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write '{}'", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, fmt::format("write to '{}' failed", path.string()));
}

void AppendTextFile(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot append to '{}'", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, fmt::format("append to '{}' failed", path.string()));
}

std::string FormatDouble(double v) { return fmt::format("{}", v); }

// ---------------------------------------------------------------- clouds

std::string CloudsToCsv(std::span<const ReachCloud> clouds) {
  std::size_t dofs = 0;
  for (const ReachCloud& c : clouds)
    for (const ReachSample& s : c.samples) dofs = std::max(dofs, s.angles.size());
  std::string out = Preamble("cloud") + "finger";
  for (std::size_t k = 0; k < dofs; ++k) out += fmt::format(",a{}", k);
  out += ",x,y,z\n";
  for (const ReachCloud& c : clouds) {
    for (const ReachSample& s : c.samples) {
      out += ToString(c.finger);
      for (std::size_t k = 0; k < dofs; ++k) {
        out += ',';
        if (k < s.angles.size()) out += FormatDouble(s.angles[k]);
      }
      out += fmt::format(",{},{},{}\n", s.position.x(), s.position.y(), s.position.z());
    }
  }
  return out;
}

std::vector<ReachCloud> CloudsFromCsv(std::string_view text) {
  const CsvTable t = ParseCsv(text, "cloud");
  const int cf = t.Column("finger"), cx = t.Column("x"), cy = t.Column("y"), cz = t.Column("z");
  std::vector<int> angle_cols;
  for (std::size_t k = 0;; ++k) {
    const auto it = std::find(t.header.begin(), t.header.end(), fmt::format("a{}", k));
    if (it == t.header.end()) break;
    angle_cols.push_back(static_cast<int>(it - t.header.begin()));
  }
  std::vector<ReachCloud> clouds;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Finger f;
    try {
      f = FingerFromString(t.At(r, cf));
    } catch (const Error&) {
      t.Fail(r, cf, fmt::format("unknown finger '{}'", t.At(r, cf)));
    }
    auto it = std::find_if(clouds.begin(), clouds.end(), [&](const ReachCloud& c) { return c.finger == f; });
    if (it == clouds.end()) {
      clouds.emplace_back().finger = f;
      it = clouds.end() - 1;
    } else if (it != clouds.end() - 1) {
      t.Fail(r, cf, "rows of one finger must be contiguous");
    }
    ReachSample s;
    s.finger = f;
    for (int c : angle_cols) {
      if (t.At(r, c).empty()) break;
      s.angles.push_back(t.Number(r, c));
    }
    s.position = Vec3(t.Number(r, cx), t.Number(r, cy), t.Number(r, cz));
    it->samples.push_back(std::move(s));
  }
  return clouds;
}

std::string CloudSummaryToJson(const CloudSummaryHeader& header, std::span<const ReachCloud> clouds) {
  json j = Header("cloud_summary");
  j["scene"] = header.scene;
  j["scene_file"] = header.scene_file;
  j["step_deg"] = header.step_deg;
  j["alpha"] = header.alpha;
  json arr = json::array();
  for (const ReachCloud& c : clouds) {
    arr.push_back({{"finger", ToString(c.finger)},
                   {"samples", c.samples.size()},
                   {"volume", c.volume},
                   {"volume_source", ToString(c.volume_source)},
                   {"centroid", ToJson(c.centroid)},
                   {"initial_fingertip", ToJson(c.initial_fingertip)},
                   {"boundary_faces", c.boundary.faces.size()},
                   {"boundary_vertices", c.boundary.vertices.size()},
                   {"warnings", c.warnings}});
  }
  j["clouds"] = arr;
  return Dump(j);
}

CloudSummaryHeader CloudSummaryFromJson(std::string_view text) {
  const json j = Parse(text, "cloud_summary");
  CloudSummaryHeader h;
  h.scene = Get<std::string>(j, "scene", "cloud_summary");
  h.scene_file = Get<std::string>(j, "scene_file", "cloud_summary");
  h.step_deg = Get<double>(j, "step_deg", "cloud_summary");
  h.alpha = Get<double>(j, "alpha", "cloud_summary");
  return h;
}

// ---------------------------------------------------------------- study tables

std::string TargetsToCsv(std::span<const TargetPoint> targets) {
  std::string out = Preamble("targets") + "id,scene,finger,stratum,x,y,z,sample\n";
  for (const TargetPoint& t : targets) {
    CheckId(t.id, "target id");
    CheckId(t.scene, "scene id");
    out += fmt::format("{},{},{},{},{},{},{},{}\n", t.id, t.scene, ToString(t.finger), ToString(t.stratum),
                       t.position.x(), t.position.y(), t.position.z(), t.sample);
  }
  return out;
}

std::vector<TargetPoint> TargetsFromCsv(std::string_view text) {
  const CsvTable t = ParseCsv(text, "targets");
  const int ci = t.Column("id"), cs = t.Column("scene"), cf = t.Column("finger"), cr = t.Column("stratum"),
            cx = t.Column("x"), cy = t.Column("y"), cz = t.Column("z"), cn = t.Column("sample");
  std::vector<TargetPoint> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    TargetPoint p;
    p.id = t.At(r, ci);
    p.scene = t.At(r, cs);
    if (p.id.empty()) t.Fail(r, ci, "empty id");
    if (p.scene.empty()) t.Fail(r, cs, "empty scene");
    try {
      p.finger = FingerFromString(t.At(r, cf));
    } catch (const Error&) {
      t.Fail(r, cf, fmt::format("unknown finger '{}'", t.At(r, cf)));
    }
    try {
      p.stratum = StratumFromString(t.At(r, cr));
    } catch (const Error&) {
      t.Fail(r, cr, fmt::format("unknown stratum '{}'", t.At(r, cr)));
    }
    p.position = Vec3(t.Number(r, cx), t.Number(r, cy), t.Number(r, cz));
    p.sample = t.Integer(r, cn);
    if (p.sample < 0) t.Fail(r, cn, "negative sample index");
    out.push_back(std::move(p));
  }
  return out;
}

std::string PairsToCsv(std::span<const TrialPair> pairs) {
  std::string out = Preamble("pairs") + "id,scene,a,b\n";
  for (const TrialPair& p : pairs) {
    CheckId(p.id, "pair id");
    out += fmt::format("{},{},{},{}\n", p.id, p.scene, p.a, p.b);
  }
  return out;
}

std::vector<TrialPair> PairsFromCsv(std::string_view text) {
  const CsvTable t = ParseCsv(text, "pairs");
  const int ci = t.Column("id"), cs = t.Column("scene"), ca = t.Column("a"), cb = t.Column("b");
  std::vector<TrialPair> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    TrialPair p{t.At(r, ci), t.At(r, cs), t.At(r, ca), t.At(r, cb)};
    for (int c : {ci, cs, ca, cb})
      if (t.At(r, c).empty()) t.Fail(r, c, "empty value");
    out.push_back(std::move(p));
  }
  return out;
}

void ValidateChoice(const ChoiceRecord& c) {
  CheckId(c.pair_id, "pair id");
  CheckId(c.scene, "scene id");
  CheckId(c.target_a, "target A id");
  CheckId(c.target_b, "target B id");
  CheckId(c.participant, "participant id");
  static const std::regex kTime(Rfc3339Pattern());
  if (!std::regex_match(c.timestamp, kTime)) {
    throw Error(ErrorCode::kSchema, fmt::format("timestamp '{}' is not RFC 3339", c.timestamp));
  }
}

std::string ChoiceCsvRow(const ChoiceRecord& c) {
  ValidateChoice(c);
  return fmt::format("{},{},{},{},{},{},{}\n", c.pair_id, c.scene, c.target_a, c.target_b, c.chose_a ? "A" : "B",
                     c.participant, c.timestamp);
}

std::string ChoicesToCsv(std::span<const ChoiceRecord> choices) {
  std::string out = Preamble("choices") + "pair_id,scene,target_a,target_b,chosen,participant,timestamp\n";
  for (const ChoiceRecord& c : choices) out += ChoiceCsvRow(c);
  return out;
}

std::vector<ChoiceRecord> ChoicesFromCsv(std::string_view text) {
  const CsvTable t = ParseCsv(text, "choices");
  const int cp = t.Column("pair_id"), cs = t.Column("scene"), ca = t.Column("target_a"), cb = t.Column("target_b"),
            cc = t.Column("chosen"), cu = t.Column("participant"), ct = t.Column("timestamp");
  std::vector<ChoiceRecord> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ChoiceRecord c;
    c.pair_id = t.At(r, cp);
    c.scene = t.At(r, cs);
    c.target_a = t.At(r, ca);
    c.target_b = t.At(r, cb);
    const std::string& side = t.At(r, cc);
    if (side != "A" && side != "B") t.Fail(r, cc, fmt::format("'{}' is not A or B", side));
    c.chose_a = side == "A";
    c.participant = t.At(r, cu);
    c.timestamp = t.At(r, ct);
    try {
      ValidateChoice(c);
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchema, fmt::format("choices line {}: {}", t.lines[r], e.what()));
    }
    out.push_back(std::move(c));
  }
  return out;
}

FeatureTable FeatureTable::Labeled() const {
  FeatureTable out;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    if (!std::isnan(labels[i])) rows.push_back(i);
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.pair_ids.push_back(pair_ids[static_cast<std::size_t>(rows[k])]);
    out.x.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
    out.labels[static_cast<Eigen::Index>(k)] = labels[rows[k]];
  }
  return out;
}

std::string FeaturesToCsv(const FeatureTable& table) {
  if (table.x.cols() != kFeatureCount || table.x.rows() != static_cast<Eigen::Index>(table.pair_ids.size()) ||
      table.labels.size() != table.x.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "feature table has inconsistent shapes");
  }
  std::string out = Preamble("features") + "pair_id";
  for (std::string_view n : kFeatureNames) out += fmt::format(",{}", n);
  out += ",choice\n";
  for (Eigen::Index i = 0; i < table.x.rows(); ++i) {
    out += table.pair_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < kFeatureCount; ++j) out += "," + FormatDouble(table.x(i, j));
    const double l = table.labels[i];
    out += std::isnan(l) ? ",\n" : (l == 1.0 ? ",1\n" : ",0\n");
  }
  return out;
}

FeatureTable FeaturesFromCsv(std::string_view text) {
  const CsvTable t = ParseCsv(text, "features");
  const int cp = t.Column("pair_id"), cc = t.Column("choice");
  std::vector<int> cols;
  for (std::string_view n : kFeatureNames) cols.push_back(t.Column(n));
  if (t.header.size() != static_cast<std::size_t>(kFeatureCount + 2)) {
    throw Error(ErrorCode::kFeatureOrder, "feature table has unexpected columns");
  }
  for (int j = 0; j < kFeatureCount; ++j) {
    if (cols[static_cast<std::size_t>(j)] != j + 1) {
      throw Error(ErrorCode::kFeatureOrder, fmt::format("column '{}' is out of order", kFeatureNames[j]));
    }
  }
  FeatureTable out;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  out.x.resize(n, kFeatureCount);
  out.labels.resize(n);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out.pair_ids.push_back(t.At(r, cp));
    for (int j = 0; j < kFeatureCount; ++j) out.x(static_cast<Eigen::Index>(r), j) = t.Number(r, j + 1);
    const std::string& c = t.At(r, cc);
    if (c.empty()) out.labels[static_cast<Eigen::Index>(r)] = kNaN;
    else if (c == "1") out.labels[static_cast<Eigen::Index>(r)] = 1.0;
    else if (c == "0") out.labels[static_cast<Eigen::Index>(r)] = 0.0;
    else t.Fail(r, cc, fmt::format("'{}' is not 1, 0 or empty", c));
  }
  return out;
}

std::string EmgDatasetToCsv(const EmgDataset& data) {
  if (data.inputs.rows() != kEmgInputs || data.outputs.rows() != kEmgOutputs ||
      data.inputs.cols() != data.outputs.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "EMG dataset has inconsistent shapes");
  }
  std::string out = Preamble("emg_dataset");
  for (int k = 0; k < kEmgInputs; ++k) out += fmt::format("{}angle{}", k ? "," : "", k);
  for (int k = 0; k < kEmgOutputs; ++k) out += fmt::format(",emg{}", k);
  out += '\n';
  for (Eigen::Index i = 0; i < data.inputs.cols(); ++i) {
    for (int k = 0; k < kEmgInputs; ++k) out += (k ? "," : "") + FormatDouble(data.inputs(k, i));
    for (int k = 0; k < kEmgOutputs; ++k) out += "," + FormatDouble(data.outputs(k, i));
    out += '\n';
  }
  return out;
}

EmgDataset EmgDatasetFromCsv(std::string_view text) {
  const CsvTable t = ParseCsv(text, "emg_dataset");
  std::vector<int> in_cols, out_cols;
  for (int k = 0; k < kEmgInputs; ++k) in_cols.push_back(t.Column(fmt::format("angle{}", k)));
  for (int k = 0; k < kEmgOutputs; ++k) out_cols.push_back(t.Column(fmt::format("emg{}", k)));
  EmgDataset d;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  d.inputs.resize(kEmgInputs, n);
  d.outputs.resize(kEmgOutputs, n);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (int k = 0; k < kEmgInputs; ++k) d.inputs(k, static_cast<Eigen::Index>(r)) = t.Number(r, in_cols[k]);
    for (int k = 0; k < kEmgOutputs; ++k) d.outputs(k, static_cast<Eigen::Index>(r)) = t.Number(r, out_cols[k]);
  }
  return d;
}

// ---------------------------------------------------------------- OBJ

std::string MeshToObj(const TriMesh& mesh) {
  std::string out = fmt::format("# graspr mesh: {} vertices, {} faces\n", mesh.vertices().size(), mesh.faces().size());
  for (const Vec3& v : mesh.vertices()) out += fmt::format("v {} {} {}\n", v.x(), v.y(), v.z());
  for (const Face& f : mesh.faces()) out += fmt::format("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
  return out;
}

namespace {

struct ObjRaw {
  std::vector<Vec3> vertices;
  std::vector<Vec3> colors;
  std::vector<Face> faces;
};

ObjRaw ParseObj(std::string_view text) {
  ObjRaw raw;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  std::size_t colored = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      std::vector<double> vals;
      std::string tok;
      while (ls >> tok) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
          throw Error(ErrorCode::kSchema, fmt::format("OBJ line {}: '{}' is not a number", number, tok));
        }
        vals.push_back(v);
      }
      if (vals.size() != 3 && vals.size() != 4 && vals.size() != 6) {
        throw Error(ErrorCode::kSchema, fmt::format("OBJ line {}: vertex needs 3, 4 or 6 values", number));
      }
      raw.vertices.emplace_back(vals[0], vals[1], vals[2]);
      if (vals.size() == 6) {
        raw.colors.emplace_back(vals[3], vals[4], vals[5]);
        ++colored;
      } else {
        raw.colors.emplace_back(kNaN, kNaN, kNaN);
      }
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        int v = 0;
        const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), v);
        if (ec != std::errc() || ptr != head.data() + head.size() || v == 0) {
          throw Error(ErrorCode::kSchema, fmt::format("OBJ line {}: bad face index '{}'", number, tok));
        }
        const int resolved = v > 0 ? v - 1 : static_cast<int>(raw.vertices.size()) + v;
        if (resolved < 0 || resolved >= static_cast<int>(raw.vertices.size())) {
          throw Error(ErrorCode::kSchema, fmt::format("OBJ line {}: face index {} out of range", number, v));
        }
        idx.push_back(resolved);
      }
      if (idx.size() < 3) throw Error(ErrorCode::kSchema, fmt::format("OBJ line {}: face needs 3 vertices", number));
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) raw.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  if (colored == 0) raw.colors.clear();
  else if (colored != raw.vertices.size()) throw Error(ErrorCode::kSchema, "OBJ mixes colored and plain vertices");
  return raw;
}

}  // namespace

TriMesh MeshFromObj(std::string_view text) {
  ObjRaw raw = ParseObj(text);
  if (raw.faces.empty()) throw Error(ErrorCode::kSchema, "OBJ mesh has no faces");
  return TriMesh(std::move(raw.vertices), std::move(raw.faces));
}

std::string PointsToObj(std::span<const Vec3> points, std::span<const double> scores) {
  if (points.empty()) throw Error(ErrorCode::kInvalidArgument, "no points to export");
  if (!scores.empty() && scores.size() != points.size()) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("{} points but {} scores", points.size(), scores.size()));
  }
  std::string out = scores.empty() ? "# graspr points\n" : "# graspr scored points: r = score, b = 1 - score\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3& p = points[i];
    if (scores.empty()) {
      out += fmt::format("v {} {} {}\n", p.x(), p.y(), p.z());
    } else {
      const double s = std::clamp(scores[i], 0.0, 1.0);
      out += fmt::format("v {} {} {} {} 0 {}\n", p.x(), p.y(), p.z(), s, 1.0 - s);
    }
  }
  return out;
}

ObjPoints PointsFromObj(std::string_view text) {
  ObjRaw raw = ParseObj(text);
  return {std::move(raw.vertices), std::move(raw.colors)};
}

// ---------------------------------------------------------------- skeleton

std::string SkeletonToJson(const HandSkeleton& skeleton) {
  json j = Header("skeleton");
  j["scale"] = skeleton.scale();
  j["palm_radius"] = skeleton.unit_palm_radius();
  json bones = json::array();
  for (const Bone& b : skeleton.bones()) {
    bones.push_back({{"name", b.name}, {"parent", b.parent}, {"offset", ToJson(b.offset)}, {"radius", b.radius}});
  }
  j["bones"] = bones;
  json joints = json::array();
  for (const Joint& jt : skeleton.joints()) {
    json axes = json::array(), limits = json::array();
    for (const Vec3& a : jt.axes) axes.push_back(ToJson(a));
    for (const auto& [lo, hi] : jt.limits) limits.push_back({lo, hi});
    joints.push_back({{"bone", jt.bone}, {"axes", axes}, {"limits", limits}});
  }
  j["joints"] = joints;
  j["fingertips"] = skeleton.fingertips();
  return Dump(j);
}

HandSkeleton SkeletonFromJson(std::string_view text) {
  const json j = Parse(text, "skeleton");
  constexpr std::string_view w = "skeleton";
  std::vector<Bone> bones;
  for (const json& b : Field(j, "bones", w)) {
    Bone bone;
    bone.name = Get<std::string>(b, "name", "skeleton bone");
    bone.parent = Get<int>(b, "parent", "skeleton bone");
    bone.offset = Vec3From(b, "offset", "skeleton bone");
    bone.radius = Get<double>(b, "radius", "skeleton bone");
    bones.push_back(std::move(bone));
  }
  std::vector<Joint> joints;
  for (const json& jt : Field(j, "joints", w)) {
    Joint joint;
    joint.bone = Get<int>(jt, "bone", "skeleton joint");
    for (const auto& a : Get<std::vector<std::vector<double>>>(jt, "axes", "skeleton joint")) {
      if (a.size() != 3) throw Error(ErrorCode::kSchema, "skeleton joint: axis must have 3 entries");
      joint.axes.emplace_back(a[0], a[1], a[2]);
    }
    for (const auto& l : Get<std::vector<std::vector<double>>>(jt, "limits", "skeleton joint")) {
      if (l.size() != 2) throw Error(ErrorCode::kSchema, "skeleton joint: limit must be [lo, hi]");
      joint.limits.emplace_back(l[0], l[1]);
    }
    joints.push_back(std::move(joint));
  }
  const auto tips = Get<std::vector<int>>(j, "fingertips", w);
  if (tips.size() != 5) throw Error(ErrorCode::kSchema, "skeleton: fingertips must list 5 bones");
  std::array<int, 5> ft{};
  std::copy(tips.begin(), tips.end(), ft.begin());
  try {
    return HandSkeleton(std::move(bones), std::move(joints), ft, Get<double>(j, "scale", w),
                        Get<double>(j, "palm_radius", w));
  } catch (const Error& e) {
    throw Error(ErrorCode::kSchema, fmt::format("skeleton: {}", e.what()), e.detail());
  }
}

// ---------------------------------------------------------------- EMG model

std::string EmgModelToJson(const EmgModel& model) {
  model.Validate();
  json j = Header("emg_model");
  j["sizes"] = model.net.sizes();
  j["activation"] = {{"hidden", "relu"}, {"output", "identity"}};
  json layers = json::array();
  for (int l = 0; l < model.net.layer_count(); ++l) {
    const auto w = model.net.weights(l);
    layers.push_back({{"weights", std::vector<double>(w.data(), w.data() + w.size())},
                      {"biases", ToJson(Eigen::VectorXd(model.net.biases(l)))}});
  }
  j["layers"] = layers;
  j["normalization"] = {{"input_min", ToJson(model.input_min)},
                        {"input_max", ToJson(model.input_max)},
                        {"output_min", ToJson(model.output_min)},
                        {"output_max", ToJson(model.output_max)}};
  return Dump(j);
}

EmgModel EmgModelFromJson(std::string_view text) {
  const json j = Parse(text, "emg_model");
  constexpr std::string_view w = "emg_model";
  const auto sizes = Get<std::vector<int>>(j, "sizes", w);
  if (sizes.size() < 2 || std::any_of(sizes.begin(), sizes.end(), [](int s) { return s <= 0; })) {
    throw Error(ErrorCode::kSchema, "emg_model: sizes must list at least two positive widths");
  }
  const json& act = Field(j, "activation", w);
  if (Get<std::string>(act, "hidden", w) != "relu" || Get<std::string>(act, "output", w) != "identity") {
    throw Error(ErrorCode::kSchema, "emg_model: only relu hidden and identity output activations are supported");
  }
  EmgModel m;
  m.net = Mlp(sizes);
  const json& layers = Field(j, "layers", w);
  if (!layers.is_array() || layers.size() != sizes.size() - 1) {
    throw Error(ErrorCode::kSchema, "emg_model: layer count does not match sizes");
  }
  for (int l = 0; l < m.net.layer_count(); ++l) {
    const auto wts = Get<std::vector<double>>(layers[l], "weights", "emg_model layer");
    const auto bs = Get<std::vector<double>>(layers[l], "biases", "emg_model layer");
    auto wm = m.net.weights(l);
    auto bm = m.net.biases(l);
    if (wts.size() != static_cast<std::size_t>(wm.size()) || bs.size() != static_cast<std::size_t>(bm.size())) {
      throw Error(ErrorCode::kShapeMismatch,
                  fmt::format("emg_model layer {}: expected {}x{} weights", l, wm.rows(), wm.cols()));
    }
    std::copy(wts.begin(), wts.end(), wm.data());
    std::copy(bs.begin(), bs.end(), bm.data());
  }
  const json& norm = Field(j, "normalization", w);
  m.input_min = VectorFrom(norm, "input_min", w);
  m.input_max = VectorFrom(norm, "input_max", w);
  m.output_min = VectorFrom(norm, "output_min", w);
  m.output_max = VectorFrom(norm, "output_max", w);
  try {
    m.Validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kSchema, fmt::format("emg_model: {}", e.what()), e.detail());
  }
  return m;
}

// ---------------------------------------------------------------- logistic model

std::string ModelToJson(const LogisticModel& model) {
  model.Validate();
  json j = Header("logistic_model");
  j["provenance"] = model.provenance;
  j["features"] = model.features;
  j["beta"] = ToJson(model.beta);
  j["intercept"] = model.intercept;
  j["standardization"] = {{"mean", ToJson(model.standardization.mean)}, {"std", ToJson(model.standardization.std)}};
  j["penalty"] = ToString(model.penalty);
  j["lambda"] = model.lambda;
  return Dump(j);
}

LogisticModel ModelFromJson(std::string_view text) {
  const json j = Parse(text, "logistic_model");
  constexpr std::string_view w = "logistic_model";
  LogisticModel m;
  m.provenance = Get<std::string>(j, "provenance", w);
  if (m.provenance != "table1" && m.provenance != "fitted") {
    throw Error(ErrorCode::kSchema, fmt::format("logistic_model: unknown provenance '{}'", m.provenance));
  }
  m.features = Get<std::vector<std::string>>(j, "features", w);
  m.beta = VectorFrom(j, "beta", w);
  m.intercept = Get<double>(j, "intercept", w);
  const json& s = Field(j, "standardization", w);
  m.standardization.mean = VectorFrom(s, "mean", w);
  m.standardization.std = VectorFrom(s, "std", w);
  m.penalty = PenaltyFromString(Get<std::string>(j, "penalty", w));
  m.lambda = Get<double>(j, "lambda", w);
  m.Validate();
  return m;
}

std::string OddsRatioTableToJson(const OddsRatioTable& table) {
  json j = Header("odds_ratio_table");
  json rows = json::array();
  for (std::size_t i = 0; i < table.features.size(); ++i) {
    rows.push_back({{"feature", table.features[i]},
                    {"odds_ratio", table.odds_ratios[i]},
                    {"p_value", i < table.p_values.size() ? table.p_values[i] : kNaN}});
  }
  j["rows"] = rows;
  return Dump(j);
}

OddsRatioTable OddsRatioTableFromJson(std::string_view text) {
  const json j = Parse(text, "odds_ratio_table");
  std::map<int, std::pair<double, double>> by_index;
  for (const json& r : Field(j, "rows", "odds_ratio_table")) {
    const std::string f = Get<std::string>(r, "feature", "odds_ratio_table row");
    const int idx = FeatureIndexOf(f);
    if (idx < 0) throw Error(ErrorCode::kSchema, fmt::format("odds_ratio_table: unknown feature '{}'", f));
    if (by_index.count(idx)) throw Error(ErrorCode::kSchema, fmt::format("odds_ratio_table: '{}' repeated", f));
    const double orr = Get<double>(r, "odds_ratio", "odds_ratio_table row");
    const double p = r.contains("p_value") && r["p_value"].is_number() ? r["p_value"].get<double>() : kNaN;
    if (!(orr > 0.0) || !std::isfinite(orr)) {
      throw Error(ErrorCode::kSchema, fmt::format("odds_ratio_table: odds ratio of '{}' must be positive", f));
    }
    by_index[idx] = {orr, p};
  }
  OddsRatioTable t;
  for (const auto& [idx, v] : by_index) {
    t.features.emplace_back(kFeatureNames[idx]);
    t.odds_ratios.push_back(v.first);
    t.p_values.push_back(v.second);
  }
  return t;
}

// ---------------------------------------------------------------- reports

std::string FitReportToJson(const FitReport& r) {
  json j = Header("fit_report");
  j["test_accuracy"] = r.test_accuracy;
  j["cv_accuracy"] = r.cv_accuracy;
  j["auc"] = r.auc;
  j["fold_accuracies"] = r.fold_accuracies;
  j["intercept"] = r.intercept;
  json coefs = json::array();
  for (const CoefficientReport& c : r.coefficients) {
    coefs.push_back({{"feature", c.feature},
                     {"beta", c.beta},
                     {"odds_ratio", c.odds_ratio},
                     {"std_error", c.std_error},
                     {"z", c.z},
                     {"p_value", c.p_value}});
  }
  j["coefficients"] = coefs;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["separated"] = r.separated;
  j["train_size"] = r.train_size;
  j["test_size"] = r.test_size;
  j["dropped"] = r.dropped;
  j["warnings"] = r.warnings;
  return Dump(j);
}

std::string SelectionReportToJson(const SelectionReport& r) {
  json j = Header("selection_report");
  json pb = json::array();
  for (std::size_t i = 0; i < r.features.size(); ++i) {
    pb.push_back({{"feature", r.features[i]}, {"r", r.point_biserial[i].r}, {"p", r.point_biserial[i].p}});
  }
  j["point_biserial"] = pb;
  json rho = json::array(), p = json::array();
  for (Eigen::Index i = 0; i < r.spearman.rho.rows(); ++i) {
    rho.push_back(ToJson(Eigen::VectorXd(r.spearman.rho.row(i).transpose())));
    p.push_back(ToJson(Eigen::VectorXd(r.spearman.p.row(i).transpose())));
  }
  j["spearman"] = {{"features", r.features}, {"rho", rho}, {"p", p}, {"constant_columns", r.spearman.constant_columns}};
  json vif = json::array();
  for (std::size_t i = 0; i < r.vif_features.size(); ++i) {
    const double v = r.vif[static_cast<Eigen::Index>(i)];
    vif.push_back({{"feature", r.vif_features[i]}, {"vif", v}, {"collinear", std::isinf(v)}});
  }
  j["vif"] = vif;
  json lasso = json::array();
  for (std::size_t i = 0; i < r.lasso_features.size(); ++i) {
    lasso.push_back({{"feature", r.lasso_features[i]}, {"beta", r.lasso_beta[static_cast<Eigen::Index>(i)]}});
  }
  j["lasso"] = lasso;
  j["kept"] = r.kept;
  json dropped = json::array();
  for (const SelectionStep& s : r.dropped) {
    dropped.push_back({{"feature", s.feature}, {"stage", s.stage}, {"reason", s.reason}});
  }
  j["dropped"] = dropped;
  return Dump(j);
}

std::string PreferenceRatiosToJson(const PreferenceRatioReport& report) {
  json j = Header("preference_ratios");
  json cells = json::array();
  for (const PreferenceCell& c : report.cells) {
    cells.push_back({{"finger", ToString(c.finger)},
                     {"stratum", ToString(c.stratum)},
                     {"wins", c.wins},
                     {"appearances", c.appearances},
                     {"ratio", c.appearances ? json(c.ratio()) : json(nullptr)},
                     {"empty", c.appearances == 0}});
  }
  j["cells"] = cells;
  return Dump(j);
}

// ---------------------------------------------------------------- scenes

std::string SceneToJson(const GraspScene& scene, const SceneFileRefs& refs) {
  json j = Header("scene");
  j["id"] = scene.id;
  j["object_name"] = scene.object_name;
  j["object"] = refs.object.empty() ? json(nullptr) : json(refs.object);
  j["object_transform"] = ToJson(scene.object_transform);
  j["skeleton"] = refs.skeleton;
  j["wrist"] = ToJson(scene.grasp.wrist());
  std::vector<double> deg;
  for (Eigen::Index i = 0; i < scene.grasp.angles().size(); ++i) deg.push_back(RadToDeg(scene.grasp.angles()[i]));
  j["grasp_angles_deg"] = deg;
  return Dump(j);
}

GraspScene LoadScene(const fs::path& path) {
  const json j = Parse(ReadTextFile(path), "scene");
  const std::string where = fmt::format("scene '{}'", path.string());
  const fs::path dir = path.parent_path();
  HandSkeleton skel = SkeletonFromJson(ReadTextFile(dir / Get<std::string>(j, "skeleton", where)));
  TriMesh object;
  const json& obj = Field(j, "object", where);
  if (!obj.is_null()) object = MeshFromObj(ReadTextFile(dir / obj.get<std::string>()));
  const auto deg = Get<std::vector<double>>(j, "grasp_angles_deg", where);
  if (static_cast<int>(deg.size()) != skel.dof_count()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("{}: {} grasp angles for {} degrees of freedom", where, deg.size(), skel.dof_count()));
  }
  Eigen::VectorXd angles(skel.dof_count());
  for (int d = 0; d < skel.dof_count(); ++d) {
    // Degree text round trips to within an ulp of the limit; snap back inside.
    const auto [lo, hi] = skel.dof_limits(d);
    double a = DegToRad(deg[static_cast<std::size_t>(d)]);
    if (a < lo && a > lo - 1e-12) a = lo;
    if (a > hi && a < hi + 1e-12) a = hi;
    angles[d] = a;
  }
  const Transform wrist = TransformFrom(Field(j, "wrist", where), where);
  GraspScene scene{Get<std::string>(j, "id", where), Get<std::string>(j, "object_name", where), skel,
                   HandPose(skel, wrist, angles), std::move(object),
                   TransformFrom(Field(j, "object_transform", where), where)};
  CheckId(scene.id, "scene id");
  return scene;
}

void SaveScene(const fs::path& dir, const GraspScene& scene, const std::string& skeleton_ref) {
  SceneFileRefs refs;
  refs.skeleton = skeleton_ref;
  if (!scene.object.empty()) {
    refs.object = scene.id + ".obj";
    WriteTextFile(dir / refs.object, MeshToObj(scene.object));
  }
  WriteTextFile(dir / (scene.id + ".json"), SceneToJson(scene, refs));
}

// ---------------------------------------------------------------- integrity

void CheckReferences(std::span<const std::string> scene_ids, std::span<const TargetPoint> targets,
                     std::span<const TrialPair> pairs, std::span<const ChoiceRecord> choices) {
  std::set<std::string> scenes;
  for (const std::string& s : scene_ids) {
    if (!scenes.insert(s).second) throw Error(ErrorCode::kConflict, fmt::format("duplicate scene id '{}'", s));
  }
  std::unordered_map<std::string, const TargetPoint*> tmap;
  for (const TargetPoint& t : targets) {
    if (!scenes.count(t.scene)) {
      throw Error(ErrorCode::kDanglingReference, fmt::format("target '{}' references unknown scene '{}'", t.id, t.scene));
    }
    if (!tmap.emplace(t.id, &t).second) throw Error(ErrorCode::kConflict, fmt::format("duplicate target id '{}'", t.id));
  }
  std::unordered_map<std::string, const TrialPair*> pmap;
  for (const TrialPair& p : pairs) {
    for (const std::string* id : {&p.a, &p.b}) {
      const auto it = tmap.find(*id);
      if (it == tmap.end()) {
        throw Error(ErrorCode::kDanglingReference, fmt::format("pair '{}' references unknown target '{}'", p.id, *id));
      }
      if (it->second->scene != p.scene) {
        throw Error(ErrorCode::kDanglingReference,
                    fmt::format("pair '{}' in scene '{}' references target '{}' of scene '{}'", p.id, p.scene, *id,
                                it->second->scene));
      }
    }
    if (p.a == p.b) throw Error(ErrorCode::kConflict, fmt::format("pair '{}' compares a target with itself", p.id));
    if (!pmap.emplace(p.id, &p).second) throw Error(ErrorCode::kConflict, fmt::format("duplicate pair id '{}'", p.id));
  }
  std::set<std::string> answered;
  for (const ChoiceRecord& c : choices) {
    const auto it = pmap.find(c.pair_id);
    if (it == pmap.end()) {
      throw Error(ErrorCode::kDanglingReference, fmt::format("choice references unknown pair '{}'", c.pair_id));
    }
    const TrialPair& p = *it->second;
    if (c.scene != p.scene || c.target_a != p.a || c.target_b != p.b) {
      throw Error(ErrorCode::kDanglingReference,
                  fmt::format("choice for pair '{}' does not match the pair's scene and targets", c.pair_id));
    }
    if (!answered.insert(c.pair_id).second) {
      throw Error(ErrorCode::kConflict, fmt::format("pair '{}' has more than one choice", c.pair_id));
    }
  }
}

}  // namespace graspr
