class PatchEmbed(nn.Module):
    def __init__(self, img_size=224, patch=16, cin=3, dim=768):
        super().__init__()
        self.proj = nn.Conv2d(cin, dim, kernel_size=patch, stride=patch)
        self.num_patches = (img_size // patch) ** 2

    def forward(self, x):
        return self.proj(x).flatten(2).transpose(1, 2)


class ViTEncoder(nn.Module):
    def __init__(self, dim=768, depth=6, heads=12):
        super().__init__()
        self.embed = PatchEmbed(dim=dim)
        self.cls = nn.Parameter(torch.zeros(1, 1, dim))
        self.pos = nn.Parameter(torch.zeros(1, self.embed.num_patches + 1, dim))
        layer = nn.TransformerEncoderLayer(dim, heads, 4 * dim, batch_first=True, norm_first=True)
        self.blocks = nn.TransformerEncoder(layer, depth)

    def forward(self, x):
        tokens = self.embed(x)
        cls = self.cls.expand(tokens.size(0), -1, -1)
        return self.blocks(torch.cat([cls, tokens], dim=1) + self.pos)
