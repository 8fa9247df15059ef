#include <gtest/gtest.h>

#include "interrl/server.hpp"

using namespace interrl;
using namespace interrl::gateway;

namespace {

class WsClient {
 public:
  WsClient(unsigned short port, const std::string& target) : ws_(io_) {
    tcp::resolver resolver(io_);
    auto results = resolver.resolve("127.0.0.1", std::to_string(port));
    asio::connect(ws_.next_layer(), results.begin(), results.end());
    ws_.handshake("127.0.0.1", target);
    ws_.text(true);
  }

  void send(const json& j) { ws_.write(asio::buffer(j.dump())); }

  json read() {
    beast::flat_buffer buf;
    ws_.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  }

  /// Reads until a record of `kind` arrives.
  json read_kind(const std::string& kind) {
    for (int i = 0; i < 10000; ++i) {
      auto j = read();
      if (j["kind"] == kind) return j;
    }
    throw std::runtime_error("no " + kind + " record");
  }

  void close() { ws_.close(websocket::close_code::normal); }

 private:
  asio::io_context io_;
  websocket::stream<tcp::socket> ws_;
};

RunConfig base() {
  RunConfig c = default_config(EnvKind::cartpole);
  c.L = 0.0;
  return c;
}

template <class Pred>
bool eventually(Pred p) {
  for (int i = 0; i < 200; ++i) {
    if (p()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return false;
}

}  // namespace

TEST(QueryParam, Extracts) {
  EXPECT_EQ(query_param("/?session=abc", "session"), "abc");
  EXPECT_EQ(query_param("/x?a=1&session=z9&b=2", "session"), "z9");
  EXPECT_EQ(query_param("/?session", "session"), "");
  EXPECT_FALSE(query_param("/", "session"));
  EXPECT_FALSE(query_param("/?other=1", "session"));
}

TEST(Server, StateFeedbackAndErrorsOverWebSocket) {
  Server server(base(), SessionOptions{}, 0);
  server.start_background();
  WsClient client(server.port(), "/?session=t1");

  auto first = client.read();
  EXPECT_EQ(first["kind"], "state");
  EXPECT_EQ(first["episode"], 0);

  client.send({{"kind", "control"}, {"seq", 1}, {"target", "start"}});
  EXPECT_EQ(client.read_kind("ack")["target"], "start");
  client.send({{"kind", "feedback"}, {"seq", 2}, {"action", "right"}});
  bool saw = false;
  for (int i = 0; i < 5000 && !saw; ++i) {
    auto j = client.read();
    saw = j["kind"] == "state" && j["feedback"] == json({-10.0, 10.0});
  }
  EXPECT_TRUE(saw);

  client.send({{"kind", "warp"}, {"seq", 3}});
  auto err = client.read_kind("error");
  EXPECT_NE(err["message"].get<std::string>().find("unknown kind"), std::string::npos);
  client.close();
  server.stop();
}

TEST(Server, DisconnectPausesAndSessionSurvives) {
  Server server(base(), SessionOptions{}, 0);
  server.start_background();
  {
    WsClient client(server.port(), "/?session=keep");
    client.read_kind("state");
    client.send({{"kind", "control"}, {"seq", 1}, {"target", "start"}});
    client.read_kind("ack");
    client.read_kind("state");
    client.close();
  }
  auto runner = server.session_for("keep");
  EXPECT_TRUE(eventually([&] { return !runner->session().running(); }));
  EXPECT_EQ(server.session_count(), 1u);

  WsClient again(server.port(), "/?session=keep");
  again.send({{"kind", "control"}, {"seq", 1}, {"target", "start"}});
  EXPECT_EQ(again.read_kind("ack")["ref_seq"], 1);
  again.close();
  server.stop();
}

TEST(Server, SessionsGetDistinctSeeds) {
  Server server(base(), SessionOptions{}, 0);
  auto a = server.session_for("");
  auto b = server.session_for("");
  EXPECT_NE(a->session().id(), b->session().id());
  EXPECT_NE(a->session().config().seed, b->session().config().seed);
  EXPECT_EQ(server.session_for(a->session().id()), a);
  server.stop();
}
