#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "graspr/error.hpp"
#include "graspr/pipeline.hpp"

namespace graspr {

struct Request {
  std::string method;  // GET or POST
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// HTTP status for an error category.
int HttpStatus(ErrorCode code);
/// {"code", "message", "detail"} envelope.
std::string ErrorJson(const Error& error);

/// Transport-independent JSON API over a loaded bundle:
///
///   GET  /scenes                      scene summaries
///   GET  /scenes/{id}/cloud?finger=f  reach cloud points (wrist frame)
///   GET  /scenes/{id}/targets         sampled targets
///   POST /predict {taskA, taskB}      {pA}
///   POST /field {referenceTask, stride}
///   POST /choices {ChoiceRecord}      201, appended to the choice log
///   GET  /choices/tally               counts
///   GET  /mesh/{id}                   object OBJ in the wrist frame
///
/// A task is a target id string or {"scene", "finger", "sample"}. Handle is
/// safe to call concurrently; choice appends are serialized.
class Service {
 public:
  explicit Service(Bundle bundle);

  Response Handle(const Request& request);

  const Bundle& bundle() const { return bundle_; }
  const Study& study() const { return *study_; }
  std::size_t choice_count() const;

 private:
  Response Route(const Request& request);

  Bundle bundle_;
  std::unique_ptr<Study> study_;
  mutable std::mutex choices_mutex_;
  std::vector<ChoiceRecord> choices_;
};

}  // namespace graspr
