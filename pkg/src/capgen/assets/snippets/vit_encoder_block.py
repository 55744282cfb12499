import torch.nn as nn


class ViTBlock(nn.Module):
    def __init__(self, dim, heads, mlp_ratio=4.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        hidden = int(dim * mlp_ratio)
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.GELU(), nn.Linear(hidden, dim))

    def forward(self, tokens):
        attended, _ = self.attn(self.norm1(tokens), self.norm1(tokens), self.norm1(tokens))
        tokens = tokens + attended
        return tokens + self.mlp(self.norm2(tokens))
