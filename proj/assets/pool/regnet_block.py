class RegNetBlock(nn.Module):
    def __init__(self, w_in, w_out, stride, group_width, bottleneck=1.0):
        super().__init__()
        w_b = int(round(w_out * bottleneck))
        groups = max(1, w_b // group_width)
        self.a = nn.Sequential(nn.Conv2d(w_in, w_b, 1, bias=False), nn.BatchNorm2d(w_b), nn.ReLU(inplace=True))
        self.b = nn.Sequential(
            nn.Conv2d(w_b, w_b, 3, stride, 1, groups=groups, bias=False), nn.BatchNorm2d(w_b), nn.ReLU(inplace=True)
        )
        self.c = nn.Sequential(nn.Conv2d(w_b, w_out, 1, bias=False), nn.BatchNorm2d(w_out))
        self.proj = None
        if w_in != w_out or stride != 1:
            self.proj = nn.Sequential(nn.Conv2d(w_in, w_out, 1, stride, bias=False), nn.BatchNorm2d(w_out))

    def forward(self, x):
        shortcut = x if self.proj is None else self.proj(x)
        return torch.relu(shortcut + self.c(self.b(self.a(x))))
