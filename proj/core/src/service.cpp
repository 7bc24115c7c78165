#include "graspr/service.hpp"

#include <filesystem>
#include <unordered_map>

#include <fmt/format.h>

#include "graspr/error.hpp"
#include "json.hpp"

namespace graspr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> Segments(const std::string& path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const std::size_t j = path.find('/', i);
    if (i < path.size()) out.push_back(path.substr(i, j == std::string::npos ? std::string::npos : j - i));
    i = j;
  }
  return out;
}

json Envelope() { return json{{"schema_version", kSchemaVersion}}; }

Response Json(const json& j, int status = 200) { return {status, "application/json", j.dump() + "\n"}; }

json ParseBody(const Request& r) {
  try {
    json j = json::parse(r.body);
    if (!j.is_object()) throw Error(ErrorCode::kSchema, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchema, "request body is not valid JSON", e.what());
  }
}

json Point(const Vec3& p) { return json::array({p.x(), p.y(), p.z()}); }

json TargetJson(const TargetPoint& t) {
  return {{"id", t.id},
          {"scene", t.scene},
          {"finger", ToString(t.finger)},
          {"stratum", ToString(t.stratum)},
          {"position", Point(t.position)},
          {"sample", t.sample}};
}

template <typename T>
T Member(const json& j, const char* key, const char* where) {
  const auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::kSchema, fmt::format("{}: missing field '{}'", where, key));
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kSchema, fmt::format("{}: field '{}' has the wrong type", where, key));
  }
}

}  // namespace

int HttpStatus(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
    case ErrorCode::kDanglingReference: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kIo: return 500;
    case ErrorCode::kUndefinedStatistic:
    case ErrorCode::kDegenerateGeometry:
    case ErrorCode::kRejectedPose: return 422;
    default: return 400;
  }
}

std::string ErrorJson(const Error& e) {
  return json{{"code", ToString(e.code())}, {"message", e.what()}, {"detail", e.detail()}}.dump();
}

Service::Service(Bundle bundle) : bundle_(std::move(bundle)), study_(bundle_.MakeStudy()) {
  const fs::path log = bundle_.Resolve(bundle_.manifest.choices);
  if (fs::exists(log)) {
    choices_ = ChoicesFromCsv(ReadTextFile(log));
    CheckReferences(study_->scene_ids(), bundle_.targets, bundle_.pairs, choices_);
  }
}

std::size_t Service::choice_count() const {
  std::lock_guard lock(choices_mutex_);
  return choices_.size();
}

Response Service::Handle(const Request& request) {
  try {
    return Route(request);
  } catch (const Error& e) {
    return {HttpStatus(e.code()), "application/json", ErrorJson(e) + "\n"};
  } catch (const std::exception& e) {
    return {500, "application/json", ErrorJson(Error(ErrorCode::kIo, "internal error", e.what())) + "\n"};
  }
}

Response Service::Route(const Request& req) {
  const std::vector<std::string> seg = Segments(req.path);
  const bool get = req.method == "GET", post = req.method == "POST";
  const auto target_of = [&](const std::string& id) -> const TargetPoint& {
    for (const TargetPoint& t : bundle_.targets)
      if (t.id == id) return t;
    throw Error(ErrorCode::kNotFound, fmt::format("unknown target '{}'", id));
  };
  const auto task_of = [&](const json& spec, const char* where) -> ReachTask {
    if (spec.is_string()) return study_->Task(target_of(spec.get<std::string>()));
    if (!spec.is_object()) throw Error(ErrorCode::kSchema, fmt::format("{} must be a target id or an object", where));
    if (spec.contains("id")) return study_->Task(target_of(Member<std::string>(spec, "id", where)));
    const std::string scene = Member<std::string>(spec, "scene", where);
    Finger finger;
    try {
      finger = FingerFromString(Member<std::string>(spec, "finger", where));
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchema, fmt::format("{}: {}", where, e.what()));
    }
    return study_->SampleTask(scene, finger, Member<int>(spec, "sample", where));
  };

  if (seg.size() == 1 && seg[0] == "scenes" && get) {
    json j = Envelope();
    json arr = json::array();
    for (const GraspScene& s : bundle_.scenes) {
      int n = 0;
      for (const TargetPoint& t : bundle_.targets) n += t.scene == s.id;
      arr.push_back({{"id", s.id},
                     {"objectName", s.object_name},
                     {"hasObject", !s.object.empty()},
                     {"targets", n},
                     {"fingers", json::array({"thumb", "index", "middle", "ring", "little"})}});
    }
    j["scenes"] = arr;
    return Json(j);
  }
  if (seg.size() == 3 && seg[0] == "scenes" && seg[2] == "cloud" && get) {
    const auto it = req.query.find("finger");
    if (it == req.query.end()) throw Error(ErrorCode::kSchema, "query parameter 'finger' is required");
    Finger finger;
    try {
      finger = FingerFromString(it->second);
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchema, e.what());
    }
    const ReachCloud& c = study_->extractor(seg[1]).cloud(finger);
    json pts = json::array();
    for (const ReachSample& s : c.samples) pts.push_back(Point(s.position));
    json j = Envelope();
    j["scene"] = seg[1];
    j["finger"] = ToString(finger);
    j["volume"] = c.volume;
    j["centroid"] = Point(c.centroid);
    j["initialFingertip"] = Point(c.initial_fingertip);
    j["points"] = pts;
    return Json(j);
  }
  if (seg.size() == 3 && seg[0] == "scenes" && seg[2] == "targets" && get) {
    study_->scene(seg[1]);
    json arr = json::array();
    for (const TargetPoint& t : bundle_.targets)
      if (t.scene == seg[1]) arr.push_back(TargetJson(t));
    json j = Envelope();
    j["scene"] = seg[1];
    j["targets"] = arr;
    return Json(j);
  }
  if (seg.size() == 1 && seg[0] == "predict" && post) {
    const json body = ParseBody(req);
    if (!body.contains("taskA") || !body.contains("taskB")) {
      throw Error(ErrorCode::kSchema, "predict: 'taskA' and 'taskB' are required");
    }
    const ReachTask a = task_of(body["taskA"], "taskA");
    const ReachTask b = task_of(body["taskB"], "taskB");
    json j = Envelope();
    j["pA"] = bundle_.model.PredictDelta(DeltaFeatures(a.features, b.features));
    return Json(j);
  }
  if (seg.size() == 1 && seg[0] == "field" && post) {
    const json body = ParseBody(req);
    if (!body.contains("referenceTask")) throw Error(ErrorCode::kSchema, "field: 'referenceTask' is required");
    const ReachTask ref = task_of(body["referenceTask"], "referenceTask");
    const int stride = body.contains("stride") ? Member<int>(body, "stride", "field") : 1;
    const FieldResult f = PreferenceFieldOf(*study_, bundle_.model, ref, stride);
    json pts = json::array();
    for (const Vec3& p : f.points) pts.push_back(Point(p));
    json j = Envelope();
    j["scene"] = ref.target.scene;
    j["finger"] = ToString(ref.target.finger);
    j["reference"] = ref.target.id;
    j["points"] = pts;
    j["samples"] = f.samples;
    j["scores"] = f.scores;
    return Json(j);
  }
  if (seg.size() == 1 && seg[0] == "choices" && post) {
    const json body = ParseBody(req);
    ChoiceRecord c;
    c.pair_id = Member<std::string>(body, "pairId", "choice");
    c.scene = Member<std::string>(body, "scene", "choice");
    c.target_a = Member<std::string>(body, "targetA", "choice");
    c.target_b = Member<std::string>(body, "targetB", "choice");
    const std::string side = Member<std::string>(body, "chosen", "choice");
    if (side != "A" && side != "B") throw Error(ErrorCode::kSchema, "choice: 'chosen' must be \"A\" or \"B\"");
    c.chose_a = side == "A";
    c.participant = Member<std::string>(body, "participant", "choice");
    c.timestamp = Member<std::string>(body, "timestamp", "choice");
    ValidateChoice(c);
    const std::string row = ChoiceCsvRow(c);
    {
      std::lock_guard lock(choices_mutex_);
      std::vector<ChoiceRecord> next = choices_;
      next.push_back(c);
      CheckReferences(study_->scene_ids(), bundle_.targets, bundle_.pairs, next);
      const fs::path log = bundle_.Resolve(bundle_.manifest.choices);
      if (!fs::exists(log)) WriteTextFile(log, ChoicesToCsv({}));
      AppendTextFile(log, row);
      choices_ = std::move(next);
    }
    json j = Envelope();
    j["choice"] = {{"pairId", c.pair_id},         {"scene", c.scene},
                   {"targetA", c.target_a},       {"targetB", c.target_b},
                   {"chosen", c.chose_a ? "A" : "B"}, {"participant", c.participant},
                   {"timestamp", c.timestamp}};
    return Json(j, 201);
  }
  if (seg.size() == 2 && seg[0] == "choices" && seg[1] == "tally" && get) {
    std::lock_guard lock(choices_mutex_);
    std::map<std::string, int> by_participant, by_scene;
    int a = 0;
    for (const ChoiceRecord& c : choices_) {
      ++by_participant[c.participant];
      ++by_scene[c.scene];
      a += c.chose_a;
    }
    json j = Envelope();
    j["count"] = choices_.size();
    j["pairs"] = bundle_.pairs.size();
    j["chosenA"] = a;
    j["byParticipant"] = by_participant;
    j["byScene"] = by_scene;
    return Json(j);
  }
  if (seg.size() == 2 && seg[0] == "mesh" && get) {
    const SceneGeometry& geo = study_->geometry(seg[1]);
    if (!geo.has_object()) throw Error(ErrorCode::kNotFound, fmt::format("scene '{}' has no object", seg[1]));
    std::vector<Vec3> local;
    for (const Vec3& v : geo.world_object().vertices()) local.push_back(geo.frame().ToLocal(v));
    return {200, "text/plain", MeshToObj(TriMesh(local, geo.world_object().faces()))};
  }
  const bool known = !seg.empty() && (seg[0] == "scenes" || seg[0] == "predict" || seg[0] == "field" ||
                                      seg[0] == "choices" || seg[0] == "mesh");
  if (known && !get && !post) {
    return {405, "application/json", ErrorJson(Error(ErrorCode::kInvalidArgument, "method not allowed")) + "\n"};
  }
  throw Error(ErrorCode::kNotFound, fmt::format("no route for {} {}", req.method, req.path));
}

}  // namespace graspr
