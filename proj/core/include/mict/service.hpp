#pragma once

#include <filesystem>
#include <memory>
#include <string>

namespace mict {

struct ServiceConfig {
  std::filesystem::path data_root = "mict-data";  // case store
  std::filesystem::path library;                 // component library XML
  int workers = 2;                               // concurrent runs
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
};

// HTTP planning service. Cases live under data_root/cases/<id>/ with
// case.json, volumes/ and runs/<rid>/ (one runner output directory each).
//
//   POST /cases                                   new case
//   GET  /cases/{id}
//   PUT  /cases/{id}/volumes/{role}               inline .mha body
//   PUT  /cases/{id}/probes                       JSON probe list
//   GET  /cdm/{equipment|protocols|models|organs}
//   POST /cases/{id}/runs                         JSON overrides -> job
//   GET  /jobs/{id}, POST /jobs/{id}/cancel
//   GET  /cases/{id}/runs/{rid}/slice?plane&index&window=c,w&overlay
//   GET  /cases/{id}/runs/{rid}/contours?plane&index&source
//   GET  /cases/{id}/runs/{rid}/files/{name}
//   POST /cases/{id}/runs/{rid}/validate
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds the listening socket and returns the port.
  int bind();
  // Serves until stop(); bind() first.
  void serve();
  // bind() plus serve() on a background thread.
  int start();
  void stop();
  // Blocks until no job is queued or running.
  void wait_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mict
