#include "fixtures.hpp"

#include "memflow/prompts.hpp"

namespace fixtures {

using nlohmann::json;
using namespace memflow;

json session(const std::string& id, const std::string& ts, const Turns& turns) {
  json t = json::array();
  for (const auto& [role, text] : turns) t.push_back({{"role", role}, {"text", text}});
  return {{"session_id", id}, {"timestamp", ts}, {"turns", t}};
}

json sample_sessions() {
  json s = json::array();
  s.push_back(session("s1", "2023-03-01T09:00:00Z",
                      {{"user", "I just bought a new Honda Civic from the dealership on 2023-03-01."},
                       {"assistant", "Congratulations on the new car!"},
                       {"user", "I prefer short answers without jargon."}}));
  s.push_back(session("s2", "2023-03-22T17:30:00Z",
                      {{"user", "The GPS system in my Civic stopped working today, so I booked a service visit."},
                       {"assistant", "Sorry to hear about the GPS malfunction."},
                       {"user", "The service center said the GPS module needs replacing."}}));
  s.push_back(session("s3", "2023-04-10T08:15:00Z",
                      {{"user", "I started a new job as a data analyst at Acme Corp."},
                       {"assistant", "That sounds exciting."},
                       {"user", "My commute to Acme is about forty minutes."}}));
  s.push_back(session("s4", "2023-06-05T19:00:00Z",
                      {{"user", "Big news: I switched jobs, my job is now senior analyst at Globex."},
                       {"assistant", "Congratulations on the promotion."},
                       {"user", "I live in Oakland now, closer to the Globex office."}}));
  s.push_back(session("s5", "2023-07-01T07:45:00Z",
                      {{"user", "I went hiking at Mount Tam with Sarah this morning."},
                       {"assistant", "How was the hiking trail?"},
                       {"user", "The hiking was great and we saw the bay. I'm a weekend hiker at heart."}}));
  s.push_back(session("s6", "2023-08-15T12:00:00Z",
                      {{"user", "At the support desk, we must never keep a customer on hold for more than five minutes."},
                       {"assistant", "Noted, that is a strict rule."},
                       {"user", "Refunds are allowed only with a receipt, and escalations must go to the team lead."}}));
  s.push_back(session("s7", "2023-09-02T20:10:00Z",
                      {{"user", "I subscribed to Wired and The Atlantic, and my favorite magazine is National Geographic."},
                       {"assistant", "Those are three great magazines."},
                       {"user", "I went hiking again at Point Reyes, another great hiking day."}}));
  return s;
}

ConversationHistory sample_history() { return ingest_history(sample_sessions(), "sample"); }

World sample_world() {
  World w{MemoryStore::from_history(sample_history()), std::make_shared<HashingEmbedder>(), {}};
  w.index = HybridIndex::build(chunk_history(w.store.history), *w.embedder);
  return w;
}

namespace {

struct Item {
  const char* id;
  const char* type;
  const char* question;
  const char* answer;
};

constexpr Item kItems[] = {
    {"q01", "targeted", "What car did I buy from the dealership?", "Honda Civic"},
    {"q02", "targeted", "What did the service center say about the GPS module?", "It needs replacing"},
    {"q03", "targeted", "Who did I go hiking with at Mount Tam?", "Sarah"},
    {"q04", "targeted", "What is my commute to Acme like?", "About forty minutes"},
    {"q05", "temporal", "How many days passed between buying my Civic and the GPS system failure?", "21 days"},
    {"q06", "temporal", "How many weeks passed between starting at Acme and switching to Globex?", "8 weeks"},
    {"q07", "temporal", "Which happened first, the hiking trip at Mount Tam or the job at Globex?", "The Globex job"},
    {"q08", "conflict", "What is my current job?", "Senior analyst at Globex"},
    {"q09", "conflict", "Where do I live these days?", "Oakland"},
    {"q10", "conflict", "Where do I work right now?", "Globex"},
    {"q11", "broad", "How many magazines do I subscribe to or like?", "Three"},
    {"q12", "broad", "How often did I go hiking?", "Twice"},
    {"q13", "broad", "List all the places I went hiking.", "Mount Tam and Point Reyes"},
    {"q14", "constraint", "What is the rule about customer hold times at the support desk?", "Never more than five minutes"},
    {"q15", "constraint", "Are refunds allowed without a receipt?", "No"},
    {"q16", "state", "How has my job changed over time?", "Data analyst at Acme, then senior analyst at Globex"},
    {"q17", "state", "How did my car situation change after the purchase?", "The GPS failed and needed service"},
    {"q18", "profile", "Any tips for writing a note to my new manager?", "Keep it short and plain"},
    {"q19", "profile", "Can you recommend a weekend activity for me?", "A hike"},
    {"q20", "targeted", "What is the name of my dentist?", "Unknown"},
};

}  // namespace

json synthetic_benchmark_json() {
  json items = json::array();
  for (const auto& it : kItems) {
    items.push_back({{"question_id", it.id},
                     {"question_type", it.type},
                     {"question", it.question},
                     {"answer", it.answer},
                     {"sessions", sample_sessions()}});
  }
  return items;
}

std::vector<ScriptedBackend::Rule> synthetic_script() {
  const std::string kAnswer = "ONLY the information in the provided context";
  std::vector<ScriptedBackend::Rule> rules;
  // Answer rules key on the question line; the packed context is part of
  // the same message.
  // The judge approves anything it is asked about except the dentist answer.
  rules.push_back({"Candidate answer: Dr.", "grounding verifier", {"no"}});
  rules.push_back({"", "grounding verifier", {"yes"}});
  // Temporal item: one tool round, then the final answer.
  rules.push_back({"TOOL_RESULT: 21", kAnswer, {"21 days"}});
  rules.push_back({"Question: How many days passed between buying my Civic", kAnswer,
                   {"TOOL: days_between | 2023-03-01 | 2023-03-22"}});
  // Conflict item: the first pass punts, the retry answers.
  rules.push_back({"Question: Where do I work right now?", kAnswer,
                   {"ESCALATE_REQUIRED", "You work at Globex as a senior analyst."}});
  const std::vector<std::pair<std::string, std::string>> replies = {
      {"What car did I buy", "You bought a Honda Civic from the dealership."},
      {"What did the service center say", "The service center said the GPS module needs replacing."},
      {"Who did I go hiking with", "Sarah"},
      {"What is my commute to Acme", "Your commute to Acme is about forty minutes each way."},
      {"How many weeks passed", "About 8 weeks"},
      {"Which happened first", "The Globex job came first, in June."},
      {"What is my current job", "You are a senior analyst at Globex."},
      {"Where do I live", "Oakland"},
      {"How many magazines", "Three: Wired, The Atlantic and National Geographic."},
      {"How often did I go hiking", "Twice"},
      {"List all the places", "Mount Tam and Point Reyes"},
      {"What is the rule about customer hold times", "Customers must never be kept on hold for more than five minutes."},
      {"Are refunds allowed", "No, refunds are allowed only with a receipt."},
      {"How has my job changed", "You moved from data analyst at Acme Corp to senior analyst at Globex."},
      {"How did my car situation change", "After buying the Civic, its GPS system stopped working and needed a new module."},
      {"Any tips for writing a note", "Keep the note short, plain and free of jargon, as you prefer."},
      {"Can you recommend a weekend activity", "A hike, since you are a weekend hiker at heart."},
      {"What is the name of my dentist", "Dr. Smith is your dentist according to the records we have here."},
  };
  for (const auto& [question, reply] : replies) rules.push_back({"Question: " + question, kAnswer, {reply}});
  return rules;
}

std::shared_ptr<LlmGateway> gateway(std::shared_ptr<ChatBackend> backend) {
  return std::make_shared<LlmGateway>(std::move(backend));
}

Pipeline default_pipeline(PipelineConfig cfg) {
  return Pipeline(std::move(cfg), PromptLibrary::bundled(), std::make_shared<HashingEmbedder>());
}

}  // namespace fixtures
