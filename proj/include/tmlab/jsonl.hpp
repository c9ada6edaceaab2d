#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "tmlab/history.hpp"

namespace tmlab {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline nlohmann::json event_to_json(const Event& e, bool debug = false) {
  nlohmann::json j;
  j["i"] = e.index;
  j["p"] = e.proc;
  j["t"] = e.txn;
  switch (e.kind) {
    case Kind::Read: j["op"] = "r"; break;
    case Kind::Write: j["op"] = "w"; break;
    case Kind::TryCommit: j["op"] = "tc"; break;
    case Kind::TryAbort: j["op"] = "ta"; break;
  }
  if (e.object) j["x"] = *e.object;
  if (e.value) j["v"] = *e.value;
  switch (e.outcome) {
    case Outcome::Ok: j["res"] = "ok"; break;
    case Outcome::Abort: j["res"] = "A"; break;
    case Outcome::Commit: j["res"] = "C"; break;
  }
  if (debug && e.seq) j["seq"] = *e.seq;
  return j;
}

inline Event event_from_json(const nlohmann::json& j) {
  Event e;
  try {
    e.index = j.at("i").get<int64_t>();
    e.proc = j.at("p").get<ProcId>();
    e.txn = j.at("t").get<TxnId>();
    std::string op = j.at("op").get<std::string>();
    if (op == "r") e.kind = Kind::Read;
    else if (op == "w") e.kind = Kind::Write;
    else if (op == "tc") e.kind = Kind::TryCommit;
    else if (op == "ta") e.kind = Kind::TryAbort;
    else throw ParseError("unknown op: " + op);
    if (j.contains("x")) e.object = j.at("x").get<ObjectId>();
    if (j.contains("v")) e.value = j.at("v").get<Value>();
    std::string res = j.at("res").get<std::string>();
    if (res == "ok") e.outcome = Outcome::Ok;
    else if (res == "A") e.outcome = Outcome::Abort;
    else if (res == "C") e.outcome = Outcome::Commit;
    else throw ParseError("unknown res: " + res);
    if (j.contains("seq")) e.seq = j.at("seq").get<int64_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("bad event: ") + ex.what());
  }
  return e;
}

inline void serialize_history(const History& h, std::ostream& os,
                              bool debug = false) {
  for (const Event& e : h.events()) os << event_to_json(e, debug).dump() << '\n';
}

inline std::string serialize_history(const History& h, bool debug = false) {
  std::ostringstream os;
  serialize_history(h, os, debug);
  return os.str();
}

inline History parse_history(std::istream& is) {
  std::vector<Event> events;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError("line " + std::to_string(lineno) + ": invalid JSON");
    events.push_back(event_from_json(j));
  }
  return History::from_indexed(std::move(events));
}

inline History parse_history(const std::string& text) {
  std::istringstream is(text);
  return parse_history(is);
}

}  // namespace tmlab
