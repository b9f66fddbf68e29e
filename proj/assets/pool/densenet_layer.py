class DenseLayer(nn.Module):
    def __init__(self, cin, growth, bn_size=4, drop=0.0):
        super().__init__()
        self.norm1 = nn.BatchNorm2d(cin)
        self.conv1 = nn.Conv2d(cin, bn_size * growth, 1, bias=False)
        self.norm2 = nn.BatchNorm2d(bn_size * growth)
        self.conv2 = nn.Conv2d(bn_size * growth, growth, 3, padding=1, bias=False)
        self.drop = drop

    def forward(self, x):
        y = self.conv1(torch.relu(self.norm1(x)))
        y = self.conv2(torch.relu(self.norm2(y)))
        if self.drop > 0:
            y = nn.functional.dropout(y, p=self.drop, training=self.training)
        return torch.cat([x, y], 1)
