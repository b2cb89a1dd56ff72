/* Build: cc smoke.c -I../include -L<target>/release -lmoe_guide_ffi -o smoke */
#include <stdio.h>
#include "moe_guide.h"

int main(int argc, char **argv) {
    if (argc < 2) {
        fprintf(stderr, "usage: %s MODEL_FILE\n", argv[0]);
        return 2;
    }
    MgModel *model = NULL;
    if (mg_model_load(argv[1], &model) != MG_OK) {
        fprintf(stderr, "load: %s\n", mg_last_error());
        return 1;
    }
    size_t dim = mg_model_state_dim(model);
    double state[3] = {0.0, 0.0, 0.0};
    double loss = 0.0;
    MgStatus st = mg_model_loss(model, state, dim, &loss);
    MgMappingConfig cfg = mg_mapping_default();
    MgDecay decay = {1.0, 0.999, MG_PER_STEP};
    MgMask *mask = NULL;
    mg_mask_new(1.0, &mask);
    double first = 0.0, second = 0.0;
    mg_shaped_bonus(model, &cfg, &decay, mask, state, dim, 0, &first);
    mg_shaped_bonus(model, &cfg, &decay, mask, state, dim, 1, &second);
    printf("moe-guide %s dim=%zu experts=%zu status=%d loss=%.6g bonus=%.6g repeat=%.6g\n",
           mg_version(), dim, mg_model_num_experts(model), (int)st, loss, first, second);
    mg_mask_free(mask);
    mg_model_free(model);
    return 0;
}
