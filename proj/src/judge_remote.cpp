#include "softalign/errors.hpp"
#include "softalign/judge.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>

namespace softalign {

namespace {

nlohmann::json item_payload(const Item& item) {
  return {{"id", item.id},
          {"modality", to_string(item.modality)},
          {"features", std::vector<double>(item.features.data(),
                                           item.features.data() + item.features.size())}};
}

}  // namespace

RemoteJudge::RemoteJudge(Options options) : options_(std::move(options)) {
  if (options_.endpoint.empty()) throw std::invalid_argument("remote judge: empty endpoint");
}

std::optional<std::string> RemoteJudge::endpoint_from_env() {
  const char* v = std::getenv(kJudgeEndpointEnv);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

std::string RemoteJudge::build_request(const Item& query, const Item& candidate) {
  const nlohmann::json body = {{"prompt_template_id", kJudgePromptTemplateId},
                               {"prompt", kJudgePromptTemplate},
                               {"query", item_payload(query)},
                               {"candidate", item_payload(candidate)}};
  return body.dump();
}

JudgeResponse RemoteJudge::parse_response(std::string_view body) {
  const auto j = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("response is not a JSON object");
  const auto field = [&](const char* name) {
    const auto it = j.find(name);
    if (it == j.end() || !it->is_number()) {
      throw ProtocolError(std::string("response lacks numeric '") + name + "'");
    }
    const double v = it->get<double>();
    if (!std::isfinite(v)) throw ProtocolError(std::string("'") + name + "' is not finite");
    return v;
  };
  JudgeResponse r;
  r.yes_logit = field("yes_logit");
  r.no_logit = field("no_logit");
  r.score = two_token_score(r.yes_logit, r.no_logit);
  return r;
}

JudgeResponse RemoteJudge::respond(const Item& query, const Item& candidate) const {
  httplib::Client client(options_.endpoint);
  const auto secs = static_cast<time_t>(options_.timeout_seconds);
  const auto usecs = static_cast<time_t>((options_.timeout_seconds - secs) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  const auto res = client.Post(options_.path, build_request(query, candidate), "application/json");
  if (!res) {
    throw TransportError("no response from " + options_.endpoint + ": " +
                         httplib::to_string(res.error()));
  }
  if (res->status >= 500 || res->status == 429) {
    throw TransportError("judge service returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProtocolError("judge service returned HTTP " + std::to_string(res->status));
  }
  return parse_response(res->body);
}

double RemoteJudge::score(const Item& query, const Item& candidate) const {
  return respond(query, candidate).score;
}

}  // namespace softalign
