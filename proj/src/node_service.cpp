#include "sandbox/node_service.hpp"

#include <atomic>
#include <thread>

#include "http_common.hpp"

namespace sandbox::node {

namespace {

using nlohmann::json;

int status_for(StoreError::Kind kind) {
    switch (kind) {
        case StoreError::Kind::NotFound: return 404;
        case StoreError::Kind::Conflict: return 409;
        case StoreError::Kind::Invalid: return 400;
    }
    return 500;
}

const char* title_for(int status) {
    switch (status) {
        case 404: return "Not Found";
        case 409: return "Conflict";
        case 400: return "Bad Request";
        default: return "Internal Server Error";
    }
}

json page_json(json items, std::uint64_t offset, std::uint64_t limit, std::uint64_t total) {
    return json{{"items", std::move(items)},
                {"offset", offset},
                {"limit", limit},
                {"totalCount", total}};
}

json store_info_json(const AnnotationStoreInfo& info) {
    return json{{"id", info.id},
                {"category", info.category},
                {"annotationCount", info.annotation_count}};
}

json stored_annotation_json(const StoredAnnotation& stored) {
    json j = schema::annotation_to_json(stored.body);
    j["annotationId"] = stored.annotation_id;
    return j;
}

std::string require_string_field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
        throw StoreError(StoreError::Kind::Invalid,
                         std::string("body must be a JSON object with string field '") + key +
                             "'");
    }
    return j[key].get<std::string>();
}

json parse_body(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) {
        throw StoreError(StoreError::Kind::Invalid, "request body is not valid JSON");
    }
    return j;
}

}  // namespace

struct NodeService::Impl {
    NodeStore& store;
    httplib::Server server;
    std::thread thread;
    std::atomic<int> bound_port{0};
    std::atomic<std::uint64_t> requests{0};

    explicit Impl(NodeStore& s) : store(s) {}

    template <typename Fn>
    void guarded(httplib::Response& res, Fn&& fn) {
        try {
            fn();
        } catch (const StoreError& e) {
            int status = status_for(e.kind());
            http::send_problem(res, status, title_for(status), e.what());
        } catch (const schema::WireError& e) {
            http::send_problem(res, 400, "Bad Request", e.what());
        }
    }

    PageQuery page_query(const httplib::Request& req) {
        return parse_page_query(http::query_param(req, "offset"),
                                http::query_param(req, "limit"));
    }

    void route() {
        server.set_pre_routing_handler([this](const httplib::Request&, httplib::Response&) {
            requests.fetch_add(1);
            return httplib::Server::HandlerResponse::Unhandled;
        });

        server.Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_redirect("/api/v1/service");
        });
        server.Get("/api/v1/service", [](const httplib::Request&, httplib::Response& res) {
            http::send_json(res, 200,
                            json{{"name", "sandbox-data-node"},
                                 {"version", "1.0.0"},
                                 {"apiBasePath", "/api/v1"}});
        });

        // datasets
        server.Post("/api/v1/datasets", [this](const httplib::Request& req,
                                               httplib::Response& res) {
            guarded(res, [&] {
                auto id = require_string_field(parse_body(req.body), "id");
                store.create_dataset(id);
                http::send_json(res, 201, schema::dataset_to_json(store.get_dataset(id)));
            });
        });
        server.Get("/api/v1/datasets", [this](const httplib::Request& req,
                                              httplib::Response& res) {
            guarded(res, [&] {
                auto page = store.list_dataset_ids(page_query(req));
                json items = json::array();
                for (const auto& id : page.items) {
                    items.push_back(json{{"id", id}});
                }
                http::send_json(res, 200,
                                page_json(std::move(items), page.offset, page.limit,
                                          page.total_count));
            });
        });
        server.Get(R"(/api/v1/datasets/([^/]+))", [this](const httplib::Request& req,
                                                         httplib::Response& res) {
            guarded(res, [&] {
                http::send_json(res, 200,
                                schema::dataset_to_json(store.get_dataset(req.matches[1])));
            });
        });
        server.Delete(R"(/api/v1/datasets/([^/]+))", [this](const httplib::Request& req,
                                                            httplib::Response& res) {
            guarded(res, [&] {
                store.delete_dataset(req.matches[1]);
                res.status = 204;
            });
        });

        // annotation stores
        server.Post(R"(/api/v1/datasets/([^/]+)/annotationStores)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        guarded(res, [&] {
                            auto body = parse_body(req.body);
                            schema::AnnotationStoreRef ref{req.matches[1],
                                                           require_string_field(body, "id")};
                            store.create_annotation_store(
                                ref, require_string_field(body, "category"));
                            http::send_json(res, 201,
                                            store_info_json(store.get_annotation_store(ref)));
                        });
                    });
        server.Get(R"(/api/v1/datasets/([^/]+)/annotationStores)",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       guarded(res, [&] {
                           auto page =
                               store.list_annotation_stores(req.matches[1], page_query(req));
                           json items = json::array();
                           for (const auto& info : page.items) {
                               items.push_back(store_info_json(info));
                           }
                           http::send_json(res, 200,
                                           page_json(std::move(items), page.offset, page.limit,
                                                     page.total_count));
                       });
                   });
        server.Get(R"(/api/v1/datasets/([^/]+)/annotationStores/([^/]+))",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       guarded(res, [&] {
                           schema::AnnotationStoreRef ref{req.matches[1], req.matches[2]};
                           http::send_json(res, 200,
                                           store_info_json(store.get_annotation_store(ref)));
                       });
                   });
        server.Delete(R"(/api/v1/datasets/([^/]+)/annotationStores/([^/]+))",
                      [this](const httplib::Request& req, httplib::Response& res) {
                          guarded(res, [&] {
                              store.delete_annotation_store({req.matches[1], req.matches[2]});
                              res.status = 204;
                          });
                      });

        // annotations
        server.Post(R"(/api/v1/datasets/([^/]+)/annotationStores/([^/]+)/annotations)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        guarded(res, [&] {
                            schema::AnnotationStoreRef ref{req.matches[1], req.matches[2]};
                            auto category = store.get_annotation_store(ref).category;
                            auto ann = schema::annotation_from_json(parse_body(req.body),
                                                                    category);
                            http::send_json(
                                res, 201,
                                stored_annotation_json(store.store_annotation(ref, ann)));
                        });
                    });
        server.Get(R"(/api/v1/datasets/([^/]+)/annotationStores/([^/]+)/annotations)",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       guarded(res, [&] {
                           schema::AnnotationStoreRef ref{req.matches[1], req.matches[2]};
                           auto page = store.list_annotations(ref, page_query(req));
                           json items = json::array();
                           for (const auto& stored : page.items) {
                               items.push_back(stored_annotation_json(stored));
                           }
                           http::send_json(res, 200,
                                           page_json(std::move(items), page.offset, page.limit,
                                                     page.total_count));
                       });
                   });
        server.Get(R"(/api/v1/datasets/([^/]+)/annotationStores/([^/]+)/annotations/([^/]+))",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       guarded(res, [&] {
                           schema::AnnotationStoreRef ref{req.matches[1], req.matches[2]};
                           http::send_json(
                               res, 200,
                               stored_annotation_json(store.get_annotation(ref, req.matches[3])));
                       });
                   });
        server.Delete(R"(/api/v1/datasets/([^/]+)/annotationStores/([^/]+)/annotations/([^/]+))",
                      [this](const httplib::Request& req, httplib::Response& res) {
                          guarded(res, [&] {
                              schema::AnnotationStoreRef ref{req.matches[1], req.matches[2]};
                              store.delete_annotation(ref, req.matches[3]);
                              res.status = 204;
                          });
                      });

        // fhir stores
        server.Post(R"(/api/v1/datasets/([^/]+)/fhirStores)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        guarded(res, [&] {
                            schema::NoteStoreRef ref{
                                req.matches[1],
                                require_string_field(parse_body(req.body), "id")};
                            store.create_fhir_store(ref);
                            http::send_json(res, 201, json{{"id", ref.fhir_store_id}});
                        });
                    });
        server.Get(R"(/api/v1/datasets/([^/]+)/fhirStores)",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       guarded(res, [&] {
                           auto page = store.list_fhir_store_ids(req.matches[1], page_query(req));
                           json items = json::array();
                           for (const auto& id : page.items) {
                               items.push_back(json{{"id", id}});
                           }
                           http::send_json(res, 200,
                                           page_json(std::move(items), page.offset, page.limit,
                                                     page.total_count));
                       });
                   });
        server.Delete(R"(/api/v1/datasets/([^/]+)/fhirStores/([^/]+))",
                      [this](const httplib::Request& req, httplib::Response& res) {
                          guarded(res, [&] {
                              store.delete_fhir_store({req.matches[1], req.matches[2]});
                              res.status = 204;
                          });
                      });

        // patients
        server.Post(R"(/api/v1/datasets/([^/]+)/fhirStores/([^/]+)/fhir/Patient)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        guarded(res, [&] {
                            schema::NoteStoreRef ref{req.matches[1], req.matches[2]};
                            auto id = require_string_field(parse_body(req.body), "identifier");
                            store.create_patient(ref, id);
                            http::send_json(res, 201, json{{"identifier", id}});
                        });
                    });
        server.Get(R"(/api/v1/datasets/([^/]+)/fhirStores/([^/]+)/fhir/Patient)",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       guarded(res, [&] {
                           schema::NoteStoreRef ref{req.matches[1], req.matches[2]};
                           auto page = store.list_patient_ids(ref, page_query(req));
                           json items = json::array();
                           for (const auto& id : page.items) {
                               items.push_back(json{{"identifier", id}});
                           }
                           http::send_json(res, 200,
                                           page_json(std::move(items), page.offset, page.limit,
                                                     page.total_count));
                       });
                   });

        // notes
        server.Post(R"(/api/v1/datasets/([^/]+)/fhirStores/([^/]+)/fhir/Note)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        guarded(res, [&] {
                            schema::NoteStoreRef ref{req.matches[1], req.matches[2]};
                            auto note = schema::note_from_json(parse_body(req.body));
                            store.create_note(ref, note);
                            http::send_json(res, 201, schema::note_to_json(note));
                        });
                    });
        server.Get(R"(/api/v1/datasets/([^/]+)/fhirStores/([^/]+)/fhir/Note)",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       guarded(res, [&] {
                           schema::NoteStoreRef ref{req.matches[1], req.matches[2]};
                           auto page = store.list_notes(ref, page_query(req));
                           json items = json::array();
                           for (const auto& note : page.items) {
                               items.push_back(schema::note_to_json(note));
                           }
                           http::send_json(res, 200,
                                           page_json(std::move(items), page.offset, page.limit,
                                                     page.total_count));
                       });
                   });
        server.Get(R"(/api/v1/datasets/([^/]+)/fhirStores/([^/]+)/fhir/Note/([^/]+))",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       guarded(res, [&] {
                           schema::NoteStoreRef ref{req.matches[1], req.matches[2]};
                           http::send_json(res, 200,
                                           schema::note_to_json(
                                               store.get_note(ref, req.matches[3])));
                       });
                   });

        server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (res.body.empty()) {
                http::send_problem(res, res.status, title_for(res.status),
                                   "no resource at " + req.path);
            }
        });
    }
};

NodeService::NodeService(NodeStore& store) : impl_(std::make_unique<Impl>(store)) {
    impl_->route();
}

NodeService::~NodeService() { stop(); }

int NodeService::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) {
            throw std::runtime_error("data node: cannot bind to " + host);
        }
    } else if (!impl_->server.bind_to_port(host, port)) {
        throw std::runtime_error("data node: cannot bind to " + host + ":" +
                                 std::to_string(port));
    }
    impl_->bound_port = bound;
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void NodeService::stop() {
    if (impl_ && impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

int NodeService::port() const { return impl_->bound_port; }

std::uint64_t NodeService::request_count() const { return impl_->requests.load(); }

}  // namespace sandbox::node
