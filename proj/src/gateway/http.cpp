#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "maple/gateway/http.hpp"
#include "maple/gateway/model.hpp"

namespace maple::gateway {

namespace {

class HttplibTransport : public HttpTransport {
 public:
  explicit HttplibTransport(int timeout_seconds) : timeout_seconds_(timeout_seconds) {}

  HttpResponse post(const std::string& host, const std::string& path,
                    const std::map<std::string, std::string>& headers,
                    const std::string& body,
                    const std::string& content_type) override {
    httplib::Client client(host);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    client.set_write_timeout(timeout_seconds_);
    httplib::Headers hdrs(headers.begin(), headers.end());
    auto res = client.Post(path, hdrs, body, content_type);
    if (!res) {
      throw TransportError("POST " + host + path + " failed: " +
                           httplib::to_string(res.error()));
    }
    return HttpResponse{res->status, res->body};
  }

 private:
  int timeout_seconds_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport(int timeout_seconds) {
  return std::make_unique<HttplibTransport>(timeout_seconds);
}

}  // namespace maple::gateway
