#pragma once

#include <map>
#include <memory>
#include <string>

namespace maple::gateway {

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Seam between the live backends and the wire; tests inject a stub.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // host is scheme-qualified, e.g. "https://api.openai.com".
  virtual HttpResponse post(const std::string& host, const std::string& path,
                            const std::map<std::string, std::string>& headers,
                            const std::string& body,
                            const std::string& content_type) = 0;
};

// Real client; throws TransportError on connection failure.
std::unique_ptr<HttpTransport> make_httplib_transport(int timeout_seconds = 120);

}  // namespace maple::gateway
