"""
Recovering runnable source from messy LLM output
=================================================

A generated reply usually wraps the model in markdown fences, sometimes with
chain-of-thought annotations, duplicate imports, a wrong hyperparameter set,
or a truncated last line. The sanitize pipeline turns that into parseable
source and keeps an audit trail of what each pass did.
"""

from capgen import sanitize

raw = """<think>
I will widen the projection and keep everything else.
</think>
Sure! Here is the model:

```python
import torch
import torch.nn as nn
import torch.nn as nn


def supported_hyperparameters():
    return {'lr', 'momentum', 'weight_decay'}


class Net(nn.Module):
    def __init__(self, in_shape, out_shape, prm, device):
        super().__init__()
        self.proj = nn.Linear(in_shape[1], out_shape[0]
```
"""

result = sanitize(raw)

print("origin:", result.origin)
print("parses:", result.ok)
print()
print("pass log:")
for entry in result.pass_log:
    marker = "*" if entry.changed else " "
    print(f"  {marker} {entry.name:24s} {entry.detail}")
print()
print("sanitized source:")
print("-" * 60)
print(result.text)
print("-" * 60)

# feeding the output back through changes nothing
again = sanitize(result.text)
print("idempotent:", again.text == result.text)
