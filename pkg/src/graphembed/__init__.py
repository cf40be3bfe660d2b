"""Graph embedding methods (factorization, random-walk, deep) and their evaluation."""

from .embedding import Embedding, read_embedding, write_embedding
from .evaluate import (
    EvalReport,
    link_predict_eval,
    map_score,
    node_classify_eval,
    precision_at_k,
    reconstruct_eval,
    sweep,
    train_logreg_ovr,
)
from .graph import (
    EdgeSplit,
    Graph,
    GraphFormatError,
    NodeLabels,
    generate_sbm,
    karate,
    laplacian,
    load_edge_list,
    load_labels,
    sample_node_subgraph,
    split_edges,
    transition_matrix,
)
from .methods import METHODS, embed, embedder
from .numerics import ConvergenceError, DivergenceError, symmetric_eigs, truncated_svd
from .sdne import SdneConfig, sdne_embed
from .sgd import SgdConfig, gf_embed, line1_embed
from .spectral import hope_embed, katz_matrix, le_embed, lle_embed
from .walks import WalkConfig, deepwalk_embed, generate_walks, node2vec_embed, sgns_train
