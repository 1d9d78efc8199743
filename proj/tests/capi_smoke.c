#include <math.h>
#include <stdio.h>
#include <string.h>

#include "intentrag/intentrag.h"

static int failures = 0;

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            fprintf(stderr, "%s:%d: CHECK(%s) failed\n", __FILE__, __LINE__, #cond); \
            ++failures;                                              \
        }                                                            \
    } while (0)

static void test_version_and_options(void) {
    CHECK(strlen(irag_version()) > 0);
    irag_options* opts = irag_options_new();
    CHECK(opts != NULL);
    CHECK(irag_options_set(opts, "k", "5") == IRAG_OK);
    CHECK(irag_options_set(NULL, "k", "5") == IRAG_USAGE);

    FILE* f = fopen("capi_smoke_config.json", "w");
    CHECK(f != NULL);
    if (f) {
        fputs("{\"api-key\": \"sk-should-not-be-here\"}", f);
        fclose(f);
        CHECK(irag_options_load_file(opts, "capi_smoke_config.json") == IRAG_USAGE);
        remove("capi_smoke_config.json");
    }
    irag_options_free(opts);
    irag_options_free(NULL);
}

static void test_canonicalize(void) {
    char buf[64];
    size_t needed = 0;
    CHECK(irag_canonicalize("  Card Swallowed ", buf, sizeof buf, &needed) == IRAG_OK);
    CHECK(strcmp(buf, "card_swallowed") == 0);
    CHECK(needed == strlen("card_swallowed"));

    char tiny[4];
    CHECK(irag_canonicalize("Card Swallowed", tiny, sizeof tiny, &needed) == IRAG_USAGE);
    CHECK(needed == strlen("card_swallowed"));
}

static void test_labelset(void) {
    irag_labelset* labels = NULL;
    CHECK(irag_labelset_load(INTENTRAG_TEST_DIR "/fixtures/banking77_labels.txt", &labels) == IRAG_OK);
    if (!labels) return;
    CHECK(irag_labelset_size(labels) == 77);
    CHECK(strcmp(irag_labelset_name(labels, 0), "activate_my_card") == 0);

    int64_t label = 0;
    const char* rule = NULL;
    CHECK(irag_parse_prediction(labels, "3 apple pay", &label, &rule) == IRAG_OK);
    CHECK(label == 3);
    CHECK(strcmp(rule, "IndexMatch") == 0);
    CHECK(irag_parse_prediction(labels, "Age Limit", &label, &rule) == IRAG_OK);
    CHECK(label == 1);
    CHECK(strcmp(rule, "ExactName") == 0);
    CHECK(irag_parse_prediction(labels, "-1", &label, &rule) == IRAG_OK);
    CHECK(label == -1);
    CHECK(strcmp(rule, "UnknownMarker") == 0);
    irag_labelset_free(labels);

    labels = NULL;
    CHECK(irag_labelset_load("/nonexistent/labels.txt", &labels) == IRAG_DATA);
    CHECK(labels == NULL);
    CHECK(strlen(irag_last_error()) > 0);
    CHECK(strlen(irag_last_error_code()) > 0);
}

static void test_embed_and_index(void) {
    enum { dim = 64, count = 3 };
    const char* texts[count] = {"my card was swallowed", "how do I top up", "exchange rate for euros"};
    float rows[count * dim];
    for (size_t i = 0; i < count; ++i) {
        CHECK(irag_test_embed(texts[i], dim, rows + i * dim) == IRAG_OK);
        double norm = 0.0;
        for (size_t d = 0; d < dim; ++d) norm += (double)rows[i * dim + d] * rows[i * dim + d];
        CHECK(fabs(sqrt(norm) - 1.0) < 1e-5);
    }
    irag_index* index = NULL;
    CHECK(irag_index_build(rows, count, dim, &index) == IRAG_OK);
    if (!index) return;
    size_t ids[2];
    double sims[2];
    CHECK(irag_index_top_k(index, rows + 1 * dim, 2, ids, sims) == IRAG_OK);
    CHECK(ids[0] == 1);
    CHECK(fabs(sims[0] - 1.0) < 1e-5);
    CHECK(sims[0] >= sims[1]);
    CHECK(irag_index_top_k(index, rows, 0, ids, sims) == IRAG_USAGE);
    irag_index_free(index);

    float zero[dim];
    memset(zero, 0, sizeof zero);
    CHECK(irag_index_build(zero, 1, dim, &index) != IRAG_OK);
}

int main(void) {
    test_version_and_options();
    test_canonicalize();
    test_labelset();
    test_embed_and_index();
    if (failures) {
        fprintf(stderr, "%d check(s) failed\n", failures);
        return 1;
    }
    printf("capi_smoke: all checks passed\n");
    return 0;
}
