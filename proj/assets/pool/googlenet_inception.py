class Inception(nn.Module):
    def __init__(self, cin, ch1, ch3red, ch3, ch5red, ch5, pool_proj):
        super().__init__()
        self.b1 = nn.Conv2d(cin, ch1, 1)
        self.b2 = nn.Sequential(nn.Conv2d(cin, ch3red, 1), nn.ReLU(True), nn.Conv2d(ch3red, ch3, 3, padding=1))
        self.b3 = nn.Sequential(nn.Conv2d(cin, ch5red, 1), nn.ReLU(True), nn.Conv2d(ch5red, ch5, 3, padding=1))
        self.b4 = nn.Sequential(nn.MaxPool2d(3, 1, 1, ceil_mode=True), nn.Conv2d(cin, pool_proj, 1))

    def forward(self, x):
        return torch.cat([self.b1(x), self.b2(x), self.b3(x), self.b4(x)], 1)
