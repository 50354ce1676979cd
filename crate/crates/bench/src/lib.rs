//! Inputs shared by the criterion benchmarks.

/// Drug-like molecules with rings, stereo and charges.
pub const MOLECULES: &[&str] = &[
    "CC(=O)Oc1ccccc1C(=O)O",
    "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
    "CC(C)Cc1ccc(cc1)[C@@H](C)C(=O)O",
    "C[C@H](N)C(=O)N[C@@H](Cc1ccccc1)C(=O)O",
    "O=C(O)C[C@H](O)C[C@H](O)/C=C/c1c(C2CC2)nc2ccccc2c1-c1ccc(F)cc1",
    "CCN(CC)CCOC(=O)c1ccc(N)cc1",
    "c1ccc2c(c1)ccc1ccccc12",
    "C[N+](C)(C)CC(=O)[O-]",
];

pub const REACTION: &str = "CC(=O)O.OCC>[H+]>CC(=O)OCC";

/// Model outputs exercising each answer pattern.
pub const OUTPUTS: &[&str] = &[
    "<think>The ring is benzene with an acetyl ester.</think><answer><SMILES>CC(=O)Oc1ccccc1C(=O)O</SMILES></answer>",
    "Reasoning first.\n```json\n{\"smiles\": \"CCN(CC)CCOC(=O)c1ccc(N)cc1\"}\n```",
    "The final answer is \\boxed{c1ccc2c(c1)ccc1ccccc12}.",
    "After checking each atom the structure is **CC(C)Cc1ccc(cc1)C(C)C(=O)O**.",
    "I think the molecule is CCO but I am not sure about it.",
];
