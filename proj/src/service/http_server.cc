#include <thread>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro that clashes
// with Eigen parameter names.
#include "flowx/error.h"
#include "flowx/service.h"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace flowx {

struct HttpServer::Impl {
  ApiHandler& handler;
  httplib::Server server;
  std::thread thread;

  explicit Impl(ApiHandler& h) : handler(h) {}
};

namespace {

void Dispatch(ApiHandler& handler, const httplib::Request& req, httplib::Response& res) {
  std::map<std::string, std::string> query;
  for (const auto& [k, v] : req.params) query.emplace(k, v);  // first value wins
  const ApiResponse r = handler.Handle(req.method, req.path, query);
  res.status = r.status;
  std::string content_type = "application/json";
  for (const auto& [k, v] : r.headers) {
    if (k == "Content-Type") {
      content_type = v;
    } else {
      res.set_header(k, v);
    }
  }
  res.set_content(r.body, content_type);
}

}  // namespace

HttpServer::HttpServer(ApiHandler& handler) : impl_(std::make_unique<Impl>(handler)) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    Dispatch(impl_->handler, req, res);
  };
  impl_->server.Get(".*", route);
  impl_->server.Options(".*", route);
  impl_->server.Post(".*", route);
}

HttpServer::~HttpServer() { Stop(); }

int HttpServer::Start(const std::string& address, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(address);
    if (bound < 0) bound = 0;
  } else if (!impl_->server.bind_to_port(address, port)) {
    bound = 0;
  }
  if (bound <= 0) {
    throw Error(ErrorKind::kConfig, "cannot bind HTTP server",
                address + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  spdlog::info("listening on http://{}:{}", address, bound);
  return bound;
}

void HttpServer::Stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void HttpServer::Wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace flowx
